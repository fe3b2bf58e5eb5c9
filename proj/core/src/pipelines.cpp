#include "ldspin/pipelines.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "ldspin/level2.hpp"

namespace ldspin {

namespace {

std::string fmt17(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hash_string(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const RunConfig& config,
            const std::string& pipeline,
            const std::optional<Certificate>& cert,
            const std::optional<double>& tail_bound) {
    out_.open(path, std::ios::binary);
    if (!out_) throw Error("cannot open output file " + path.string());
    out_ << "# ldspin " << pipeline << "\n";
    out_ << "# config_hash = " << hash_string(config.config_hash) << "\n";
    out_ << "# k = " << config.k << "\n";
    out_ << "# beta = " << fmt17(config.beta) << "\n";
    if (cert) {
      out_ << "# certificate_a = " << fmt17(cert->a) << "\n";
      out_ << "# certificate_beta0 = " << fmt17(cert->beta0) << "\n";
      out_ << "# certificate_delta = " << fmt17(cert->delta) << "\n";
    } else {
      out_ << "# certificate = none\n";
    }
    out_ << "# support_tail_bound = "
         << (tail_bound ? fmt17(*tail_bound) : "unavailable") << "\n";
  }

  void header(const std::vector<std::string>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i)
      out_ << (i ? "," : "") << cols[i];
    out_ << "\n";
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

Certificate certify(const RunConfig& config, const Model& model) {
  return find_beta0(model.potential, model.x_norm(), config.a_grid,
                    config.delta, config.beta_max);
}

void require_certified(const RunConfig& config, const Certificate& cert,
                       bool uncertified) {
  if (config.beta > cert.beta0 && config.certified_only && !uncertified)
    throw CapError(
        "beta exceeds the certified beta0 (" + fmt17(cert.beta0) +
        "); rerun with --uncertified to proceed anyway");
}

EngineOptions engine_options(const RunConfig& config) {
  EngineOptions opt;
  opt.term_cap = config.term_cap;
  opt.tilt_sign = config.literal_sign ? -1 : +1;
  return opt;
}

LatticeBox padded(const LatticeBox& box, int pad) {
  LatticeBox outer = box;
  for (int a = 0; a < box.d; ++a) {
    outer.corner[a] -= pad;
    outer.lengths[a] += 2 * pad;
  }
  return outer;
}

void run_exact(const RunConfig& config, const std::filesystem::path& dir,
               const Certificate& cert) {
  Model model = config.make_model();
  ExactEngine exact(model, config.dim_cap);
  const int pad = std::max(1, model.potential.range());
  CsvWriter csv(dir / "exact.csv", config, "exact", cert, std::nullopt);
  csv.header({"volume", "t", "f_free", "f_embedded", "tilde_f", "gt_gap"});
  for (const auto& box : config.volumes) {
    const LatticeBox outer = padded(box, pad);
    // The embedded column needs the padded volume; report n/a past the cap.
    long long outer_dim = 1;
    bool embedded_fits = true;
    for (long long i = 0; i < outer.volume() && embedded_fits; ++i) {
      outer_dim *= model.site_dim();
      embedded_fits = outer_dim <= config.dim_cap;
    }
    for (double t : config.t_grid) {
      const double f_free = exact.finite_F(box, t, config.beta);
      const double tf = exact.tilde_F(box, t, config.beta);
      const std::string f_emb =
          embedded_fits
              ? fmt17(exact.finite_F_embedded(box, outer, t, config.beta))
              : "n/a";
      csv.row({std::to_string(box.volume()), fmt17(t), fmt17(f_free), f_emb,
               fmt17(tf), fmt17(f_free - tf)});
    }
  }
}

void run_expand(const RunConfig& config, const std::filesystem::path& dir,
                const Certificate& cert) {
  Model model = config.make_model();
  LevelOne level1(model, engine_options(config), cert);
  std::optional<double> tail;
  {
    auto series = level1.expansion().xi_free(Complex(config.t_grid.front(), 0),
                                             Complex(config.beta, 0), config.k,
                                             cert);
    tail = series.support_tail_bound;
  }
  {
    std::ofstream table(dir / "clusters.csv", std::ios::binary);
    level1.expansion().dump_cluster_table(table, 0.0, config.beta, config.k);
  }
  CsvWriter csv(dir / "expand.csv", config, "expand", cert, tail);
  csv.header({"t", "xi", "f", "next_order_estimate", "support_tail_bound"});
  for (double t : config.t_grid) {
    const auto series = level1.expansion().xi_free(
        Complex(t, 0), Complex(config.beta, 0), config.k, cert);
    const double f = level1.F_free(t, config.beta, config.k);
    csv.row({fmt17(t), fmt17(series.value.real()), fmt17(f),
             fmt17(series.next_order_estimate),
             series.support_tail_bound ? fmt17(*series.support_tail_bound)
                                       : "unavailable"});
  }
}

void run_rate(const RunConfig& config, const std::filesystem::path& dir,
              const Certificate& cert) {
  Model model = config.make_model();
  LevelOne level1(model, engine_options(config), cert);
  ExactEngine exact(model, config.dim_cap);

  const LatticeBox* largest = &config.volumes.front();
  for (const auto& box : config.volumes)
    if (box.volume() > largest->volume()) largest = &box;

  const auto f = level1.generating_function(config.t_grid, config.beta,
                                            config.k);
  require_convex(f.t_grid, f.values, 1e-9, "rate pipeline F");
  {
    CsvWriter csv(dir / "rate_f.csv", config, "rate", cert, std::nullopt);
    csv.header({"t", "f", "tilde_f", "gap"});
    for (std::size_t i = 0; i < f.t_grid.size(); ++i) {
      const double tf = exact.tilde_F(*largest, f.t_grid[i], config.beta);
      csv.row({fmt17(f.t_grid[i]), fmt17(f.values[i]), fmt17(tf),
               fmt17(f.values[i] - tf)});
    }
  }
  const auto rate = legendre(f, config.x_grid);
  TildeIMetadata meta;
  const auto tilde =
      level1.tilde_I(exact, config.x_grid, config.beta, config.volumes, &meta);
  require_convex(rate.x_grid, rate.values, 1e-9, "rate pipeline I");
  require_convex(tilde.x_grid, tilde.values, 1e-9, "rate pipeline I~");
  {
    CsvWriter csv(dir / "rate_i.csv", config, "rate", cert, std::nullopt);
    // tilde_i is the finite-volume proxy at the largest volume; the last two
    // columns carry the 1/|volume| Richardson extrapolation metadata.
    const bool extrapolated = !meta.extrapolated.empty();
    csv.header({"x", "i", "tilde_i", "tilde_i_prev", "tilde_i_extrapolated"});
    for (std::size_t i = 0; i < rate.x_grid.size(); ++i)
      csv.row({fmt17(rate.x_grid[i]), fmt17(rate.values[i]),
               fmt17(tilde.values[i]),
               extrapolated ? fmt17(meta.previous_values[i]) : "n/a",
               extrapolated ? fmt17(meta.extrapolated[i]) : "n/a"});
  }
}

void run_level2(const RunConfig& config, const std::filesystem::path& dir,
                const Certificate& cert) {
  Model model = config.make_model();
  LevelTwo level2(model, engine_options(config), cert);
  ExactEngine exact(model, config.dim_cap);
  const std::size_t m = level2.atoms().size();

  {
    CsvWriter csv(dir / "level2_rate.csv", config, "level2", cert,
                  std::nullopt);
    std::vector<std::string> cols;
    for (std::size_t k = 0; k < m; ++k) cols.push_back("mu" + std::to_string(k));
    cols.push_back("rate2");
    csv.header(cols);
    // Deterministic interior simplex sample: compositions of `steps` into m
    // positive parts.
    const int steps = m == 2 ? 20 : 10;
    std::vector<int> parts(m, 1);
    std::function<void(std::size_t, int)> emit = [&](std::size_t pos,
                                                     int left) {
      if (pos + 1 == m) {
        parts[pos] = left;
        SpectralSimplexPoint mu;
        mu.atoms = level2.atoms();
        for (int p : parts)
          mu.weights.push_back(static_cast<double>(p) / steps);
        const auto r = level2.rate2(mu, config.beta, config.k);
        std::vector<std::string> cells;
        for (double w : mu.weights) cells.push_back(fmt17(w));
        cells.push_back(fmt17(r.value));
        csv.row(cells);
        return;
      }
      for (int p = 1; p <= left - static_cast<int>(m - pos - 1); ++p) {
        parts[pos] = p;
        emit(pos + 1, left - p);
      }
    };
    emit(0, steps);
  }
  {
    CsvWriter csv(dir / "level2_contraction.csv", config, "level2", cert,
                  std::nullopt);
    csv.header({"x", "i_level1", "i_contracted"});
    for (double x : config.x_grid) {
      const auto r = level2.contraction_check(x, config.beta, config.k);
      csv.row({fmt17(x), fmt17(r.level1), fmt17(r.contracted)});
    }
  }
  {
    const LatticeBox* smallest = &config.volumes.front();
    for (const auto& box : config.volumes)
      if (box.volume() < smallest->volume()) smallest = &box;
    CsvWriter csv(dir / "level2_types.csv", config, "level2", cert,
                  std::nullopt);
    csv.header({"volume", "histogram", "probability"});
    for (const auto& t :
         level2.empirical_measure_distribution(exact, *smallest, config.beta)) {
      std::string hist;
      for (std::size_t k = 0; k < t.histogram.size(); ++k) {
        if (k) hist += ';';
        hist += std::to_string(t.histogram[k]);
      }
      csv.row({std::to_string(smallest->volume()), '"' + hist + '"',
               fmt17(t.probability)});
    }
  }
}

void run_gtgap(const RunConfig& config, const std::filesystem::path& dir,
               const Certificate& cert) {
  Model model = config.make_model();
  ExactEngine exact(model, config.dim_cap);
  CsvWriter csv(dir / "gtgap.csv", config, "gtgap", cert, std::nullopt);
  csv.header({"volume", "t", "tilde_f", "f", "gap"});
  for (const auto& box : config.volumes)
    for (double t : config.t_grid) {
      const auto g = exact.golden_thompson_gap(box, t, config.beta);
      csv.row({std::to_string(box.volume()), fmt17(t), fmt17(g.tilde_f),
               fmt17(g.f), fmt17(g.gap)});
    }
}

void run_psinorm(const RunConfig& config, const std::filesystem::path& dir) {
  const auto r = psi_norm_full(config.x);
  const Complex tr = config.x.trace();
  const Complex attained = (config.x * r.witness).trace() / tr;
  nlohmann::json j;
  j["config_hash"] = hash_string(config.config_hash);
  j["norm"] = r.value;
  j["witness_attained"] = std::abs(attained);
  std::ofstream out(dir / "psinorm.json", std::ios::binary);
  out << j.dump(2) << "\n";
}

void run_clt(const RunConfig& config, const std::filesystem::path& dir,
             const Certificate& cert) {
  Model model = config.make_model();
  LevelOne level1(model, engine_options(config), cert);
  ExactEngine exact(model, config.dim_cap);
  const auto report = level1.clt_compare(exact, config.volumes, config.t_grid,
                                         config.beta, config.k);
  CsvWriter csv(dir / "clt.csv", config, "clt", cert, std::nullopt);
  // W is centered with the finite-volume mean; the infinite-volume shift is
  // O(|boundary|/|volume|).
  csv.header({"volume", "t", "deviation", "sigma2"});
  for (const auto& row : report.rows)
    csv.row({std::to_string(row.volume), fmt17(row.t), fmt17(row.deviation),
             fmt17(report.sigma2)});
}

int guarded(const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CapError& e) {
    std::cerr << "cap/infeasible: " << e.what() << "\n";
    return kExitCap;
  } catch (const DomainError& e) {
    std::cerr << "infeasible request: " << e.what() << "\n";
    return kExitCap;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariant;
  }
}

}  // namespace

int cmd_certify(const RunConfig& config, const std::string& out_dir) {
  return guarded([&] {
    const Model model = config.make_model();
    std::filesystem::create_directories(out_dir);
    nlohmann::json j;
    j["config_hash"] = hash_string(config.config_hash);
    j["delta"] = config.delta;
    nlohmann::json margins = nlohmann::json::array();
    Certificate best{0, -1, config.delta};
    for (double a : config.a_grid) {
      Certificate c =
          find_beta0(model.potential, model.x_norm(), {a}, config.delta,
                     config.beta_max);
      nlohmann::json entry;
      entry["a"] = a;
      entry["beta0"] = c.beta0;
      entry["margin_at_beta0"] =
          config.delta > 0
              ? kp_condition_analytic(model.potential, model.x_norm(), a,
                                      config.delta, c.beta0)
              : kp_condition(model.potential, a, c.beta0);
      margins.push_back(entry);
      if (c.beta0 > best.beta0) best = c;
    }
    j["margins"] = margins;
    j["a"] = best.a;
    j["beta0"] = best.beta0;
    j["feasible"] = best.beta0 > 0;
    std::ofstream out(std::filesystem::path(out_dir) / "certificate.json",
                      std::ios::binary);
    if (!out) throw Error("cannot write certificate.json");
    out << j.dump(2) << "\n";
    if (best.beta0 <= 0) throw CapError("no feasible certificate");
  });
}

int cmd_run(const RunConfig& config, const std::string& pipeline,
            const std::string& out_dir, bool uncertified) {
  return guarded([&] {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    const Model model = config.make_model();
    const Certificate cert = certify(config, model);

    if (pipeline == "exact") {
      run_exact(config, dir, cert);
    } else if (pipeline == "expand") {
      require_certified(config, cert, uncertified);
      run_expand(config, dir, cert);
    } else if (pipeline == "rate") {
      require_certified(config, cert, uncertified);
      run_rate(config, dir, cert);
    } else if (pipeline == "level2") {
      require_certified(config, cert, uncertified);
      run_level2(config, dir, cert);
    } else if (pipeline == "gtgap") {
      run_gtgap(config, dir, cert);
    } else if (pipeline == "psinorm") {
      run_psinorm(config, dir);
    } else if (pipeline == "clt") {
      require_certified(config, cert, uncertified);
      run_clt(config, dir, cert);
    } else {
      throw ConfigError("unknown pipeline '" + pipeline + "'");
    }
  });
}

}  // namespace ldspin
