#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldspin/model.hpp"

namespace ldspin {

// Parsed run configuration: a flat key-value text format with [model],
// [run] and [output] sections. Matrices are lists of rows, entries "re" or
// "re+im i" (e.g. 0.5, -1.25+2i, 1e-3-0.5i).
struct RunConfig {
  int site_dim = 2;
  OperatorMatrix x;
  std::vector<BaseInteraction> terms;

  double beta = 0;
  int k = 4;
  std::vector<double> t_grid;
  std::vector<double> x_grid;
  std::vector<double> a_grid{0.05, 0.1, 0.2, 0.4};
  std::vector<LatticeBox> volumes;
  double delta = 0;
  double beta_max = kDefaultBetaMax;
  long long dim_cap = kDefaultDimCap;
  long long term_cap = 2'000'000;
  bool certified_only = true;
  bool literal_sign = false;

  std::string out_dir = "out";
  std::uint64_t config_hash = 0;

  Model make_model() const;
  void validate() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

// Matrix literal: [[...],[...]]; throws ConfigError with line/column
// diagnostics (positions are relative to the literal).
OperatorMatrix parse_matrix(const std::string& literal);

// "re", "re+im i" or "im i"; line/col attached by the caller on failure.
Complex parse_complex_entry(const std::string& text);

std::uint64_t fnv1a64(const std::string& data);

}  // namespace ldspin
