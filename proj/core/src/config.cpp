#include "ldspin/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace ldspin {

namespace {

std::vector<double> default_grid(double lo, double step, double hi) {
  std::vector<double> g;
  for (long long i = 0;; ++i) {
    const double v = lo + static_cast<double>(i) * step;
    if (v > hi + step * 1e-9) break;
    g.push_back(std::abs(v) < step * 1e-9 ? 0.0 : v);
  }
  return g;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_double(const std::string& s, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid number '" + s + "'", line, 1);
  }
}

long long parse_int(const std::string& s, int line) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid integer '" + s + "'", line, 1);
  }
}

bool parse_bool(const std::string& s, int line) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("invalid boolean '" + s + "'", line, 1);
}

// "a:step:b" ranges or whitespace-separated explicit values.
std::vector<double> parse_grid(const std::string& s, int line) {
  std::vector<double> out;
  if (s.find(':') != std::string::npos) {
    const auto c1 = s.find(':');
    const auto c2 = s.find(':', c1 + 1);
    if (c2 == std::string::npos)
      throw ConfigError("range grids use start:step:end", line, 1);
    const double start = parse_double(trim(s.substr(0, c1)), line);
    const double step = parse_double(trim(s.substr(c1 + 1, c2 - c1 - 1)), line);
    const double end = parse_double(trim(s.substr(c2 + 1)), line);
    if (step <= 0) throw ConfigError("grid step must be positive", line, 1);
    for (double v = start; v <= end + step * 1e-9; v += step)
      out.push_back(std::abs(v) < step * 1e-9 ? 0.0 : v);
    return out;
  }
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(parse_double(tok, line));
  return out;
}

// "(4) (6)" or "(2 3)"; each tuple is per-axis lengths.
std::vector<LatticeBox> parse_volumes(const std::string& s, int line) {
  std::vector<LatticeBox> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i >= s.size()) break;
    if (s[i] != '(')
      throw ConfigError("volumes are '(lx [ly [lz]])' tuples", line,
                        static_cast<int>(i) + 1);
    const auto close = s.find(')', i);
    if (close == std::string::npos)
      throw ConfigError("unterminated volume tuple", line,
                        static_cast<int>(i) + 1);
    std::istringstream in(s.substr(i + 1, close - i - 1));
    std::vector<int> lens;
    std::string tok;
    while (in >> tok)
      lens.push_back(static_cast<int>(parse_int(tok, line)));
    if (lens.empty() || lens.size() > 3)
      throw ConfigError("volume tuples take 1 to 3 lengths", line,
                        static_cast<int>(i) + 1);
    LatticeBox box;
    box.d = static_cast<int>(lens.size());
    for (std::size_t a = 0; a < lens.size(); ++a) {
      if (lens[a] <= 0)
        throw ConfigError("volume lengths must be positive", line,
                          static_cast<int>(i) + 1);
      box.lengths[a] = lens[a];
    }
    out.push_back(box);
    i = close + 1;
  }
  return out;
}

// "(0) (1 0)" site tuples.
SiteList parse_shape(const std::string& s, int line) {
  SiteList out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i >= s.size()) break;
    if (s[i] != '(')
      throw ConfigError("shapes are '(x [y [z]])' site tuples", line,
                        static_cast<int>(i) + 1);
    const auto close = s.find(')', i);
    if (close == std::string::npos)
      throw ConfigError("unterminated site tuple", line,
                        static_cast<int>(i) + 1);
    std::istringstream in(s.substr(i + 1, close - i - 1));
    std::vector<int> coords;
    std::string tok;
    while (in >> tok)
      coords.push_back(static_cast<int>(parse_int(tok, line)));
    if (coords.empty() || coords.size() > 3)
      throw ConfigError("site tuples take 1 to 3 coordinates", line,
                        static_cast<int>(i) + 1);
    Site site;
    for (std::size_t a = 0; a < coords.size(); ++a) site.c[a] = coords[a];
    out.push_back(site);
    i = close + 1;
  }
  return sorted_unique(out);
}

}  // namespace

Complex parse_complex_entry(const std::string& text) {
  const std::string s = trim(text);
  if (s.empty()) throw ConfigError("empty matrix entry");
  auto to_double = [&](const std::string& part, double fallback) {
    const std::string p = trim(part);
    if (p.empty() || p == "+") return fallback;
    if (p == "-") return -fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(p, &used);
      if (used != p.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("invalid matrix entry '" + s + "'");
    }
  };
  if (s.back() != 'i' && s.back() != 'I')
    return Complex(to_double(s, 0.0), 0);
  // Split off the trailing imaginary part at the last top-level sign.
  const std::string body = s.substr(0, s.size() - 1);
  std::size_t split = std::string::npos;
  for (std::size_t i = body.size(); i-- > 1;) {
    if ((body[i] == '+' || body[i] == '-') && body[i - 1] != 'e' &&
        body[i - 1] != 'E') {
      split = i;
      break;
    }
  }
  if (split == std::string::npos) return Complex(0, to_double(body, 1.0));
  return Complex(to_double(body.substr(0, split), 0.0),
                 to_double(body.substr(split), 1.0));
}

OperatorMatrix parse_matrix(const std::string& literal) {
  const std::string s = trim(literal);
  if (s.size() < 2 || s.front() != '[' || s.back() != ']')
    throw ConfigError("matrix literal must be [[...],[...]]", 0, 1);
  std::vector<std::vector<Complex>> rows;
  std::size_t i = 1;
  while (i < s.size() - 1) {
    while (i + 1 < s.size() &&
           (std::isspace(static_cast<unsigned char>(s[i])) || s[i] == ','))
      ++i;
    if (i >= s.size() - 1) break;
    if (s[i] != '[')
      throw ConfigError("expected '[' starting a matrix row", 0,
                        static_cast<int>(i) + 1);
    const auto close = s.find(']', i);
    if (close == std::string::npos)
      throw ConfigError("unterminated matrix row", 0,
                        static_cast<int>(i) + 1);
    std::vector<Complex> row;
    std::string cell;
    for (std::size_t j = i + 1; j <= close; ++j) {
      if (j == close || s[j] == ',') {
        const std::string entry = trim(cell);
        if (!entry.empty()) {
          try {
            row.push_back(parse_complex_entry(entry));
          } catch (const ConfigError& e) {
            throw ConfigError(e.what(), 0, static_cast<int>(j) + 1);
          }
        }
        cell.clear();
      } else {
        cell += s[j];
      }
    }
    if (row.empty())
      throw ConfigError("empty matrix row", 0, static_cast<int>(i) + 1);
    rows.push_back(std::move(row));
    i = close + 1;
  }
  if (rows.empty()) throw ConfigError("empty matrix literal", 0, 1);
  const std::size_t n = rows.size();
  for (const auto& r : rows)
    if (r.size() != n)
      throw ConfigError("matrix must be square with equal row lengths", 0, 1);
  OperatorMatrix m(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) m(r, c) = rows[r][c];
  return m;
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Model RunConfig::make_model() const {
  return Model{x, Potential(site_dim, terms)};
}

void RunConfig::validate() const {
  if (x.rows() == 0) throw ConfigError("[model] x matrix is required");
  if (x.rows() != site_dim || x.cols() != site_dim)
    throw ConfigError("[model] x must be site_dim x site_dim");
  if (!is_hermitian(x)) throw ConfigError("[model] x must be Hermitian");
  if (k < 1) throw ConfigError("[run] k must be >= 1");
  if (t_grid.empty() || x_grid.empty() || a_grid.empty())
    throw ConfigError("[run] grids must be nonempty");
  if (volumes.empty()) throw ConfigError("[run] volumes must be nonempty");
  if (dim_cap <= 0 || term_cap <= 0)
    throw ConfigError("[run] caps must be positive");
  if (beta < 0) throw ConfigError("[run] beta must be nonnegative");
  if (beta_max <= 0) throw ConfigError("[run] beta_max must be positive");
  if (delta < 0) throw ConfigError("[run] delta must be nonnegative");
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig config;
  config.t_grid = {};
  config.x_grid = {};
  config.config_hash = fnv1a64(text);

  // term index -> (shape?, matrix?) gathered before assembly
  std::map<int, std::pair<std::optional<SiteList>, std::optional<OperatorMatrix>>>
      term_parts;

  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("unterminated section header", line_no, 1);
      section = line.substr(1, line.size() - 2);
      if (section != "model" && section != "run" && section != "output")
        throw ConfigError("unknown section [" + section + "]", line_no, 1);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected key = value", line_no, 1);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (value.empty()) throw ConfigError("empty value", line_no,
                                         static_cast<int>(eq) + 2);

    if (section == "model") {
      if (key == "site_dim") {
        config.site_dim = static_cast<int>(parse_int(value, line_no));
      } else if (key == "x") {
        try {
          config.x = parse_matrix(value);
        } catch (const ConfigError& e) {
          throw ConfigError(e.what(), line_no, e.column);
        }
      } else if (key.rfind("term", 0) == 0) {
        const auto dot = key.find('.');
        if (dot == std::string::npos)
          throw ConfigError("term keys are termN.shape / termN.matrix",
                            line_no, 1);
        const long long idx = parse_int(key.substr(4, dot - 4), line_no);
        const std::string field = key.substr(dot + 1);
        auto& parts = term_parts[static_cast<int>(idx)];
        if (field == "shape") {
          parts.first = parse_shape(value, line_no);
        } else if (field == "matrix") {
          try {
            parts.second = parse_matrix(value);
          } catch (const ConfigError& e) {
            throw ConfigError(e.what(), line_no, e.column);
          }
        } else {
          throw ConfigError("unknown term field '" + field + "'", line_no, 1);
        }
      } else {
        throw ConfigError("unknown [model] key '" + key + "'", line_no, 1);
      }
    } else if (section == "run") {
      if (key == "beta")
        config.beta = parse_double(value, line_no);
      else if (key == "k")
        config.k = static_cast<int>(parse_int(value, line_no));
      else if (key == "t_grid")
        config.t_grid = parse_grid(value, line_no);
      else if (key == "x_grid")
        config.x_grid = parse_grid(value, line_no);
      else if (key == "a_grid")
        config.a_grid = parse_grid(value, line_no);
      else if (key == "volumes")
        config.volumes = parse_volumes(value, line_no);
      else if (key == "delta")
        config.delta = parse_double(value, line_no);
      else if (key == "beta_max")
        config.beta_max = parse_double(value, line_no);
      else if (key == "dim_cap")
        config.dim_cap = parse_int(value, line_no);
      else if (key == "term_cap")
        config.term_cap = parse_int(value, line_no);
      else if (key == "certified_only")
        config.certified_only = parse_bool(value, line_no);
      else if (key == "literal_sign")
        config.literal_sign = parse_bool(value, line_no);
      else
        throw ConfigError("unknown [run] key '" + key + "'", line_no, 1);
    } else if (section == "output") {
      if (key == "dir")
        config.out_dir = value;
      else
        throw ConfigError("unknown [output] key '" + key + "'", line_no, 1);
    } else {
      throw ConfigError("key outside any section", line_no, 1);
    }
  }

  for (const auto& [idx, parts] : term_parts) {
    if (!parts.first || !parts.second)
      throw ConfigError("term" + std::to_string(idx) +
                        " needs both .shape and .matrix");
    config.terms.push_back(BaseInteraction{*parts.first, *parts.second});
  }

  if (config.t_grid.empty()) config.t_grid = default_grid(-2.0, 0.05, 2.0);
  if (config.x_grid.empty()) config.x_grid = default_grid(-0.9, 0.05, 0.9);
  if (config.volumes.empty())
    config.volumes = {LatticeBox::chain(4), LatticeBox::chain(6),
                      LatticeBox::chain(8)};
  config.validate();
  return config;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace ldspin
