#include "tgcn/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "tgcn/errors.hpp"

namespace tgcn {

namespace {

std::string trim(const std::string& s) {
  const std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' has non-numeric value '" + v + "'");
  }
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long x = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<int>(x);
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' has non-integer value '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: key '" + key + "' must be true or false, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;

  const std::map<std::string, std::function<void(const std::string&, const std::string&)>>
      setters = {
          {"data", [&](const std::string&, const std::string& v) { cfg.data = v; }},
          {"header", [&](const std::string& k, const std::string& v) { cfg.header = parse_bool(k, v); }},
          {"steps_per_day", [&](const std::string& k, const std::string& v) { cfg.steps_per_day = parse_int(k, v); }},
          {"train_frac", [&](const std::string& k, const std::string& v) { cfg.train_frac = parse_double(k, v); }},
          {"val_frac", [&](const std::string& k, const std::string& v) { cfg.val_frac = parse_double(k, v); }},
          {"normalization",
           [&](const std::string& k, const std::string& v) {
             if (v != "global" && v != "per_road") {
               throw ConfigError("config: " + k + " must be global or per_road");
             }
             cfg.normalization = v;
           }},
          {"graph_kind",
           [&](const std::string& k, const std::string& v) {
             if (v != "temporal" && v != "spatial") {
               throw ConfigError("config: " + k + " must be temporal or spatial");
             }
             cfg.graph_kind = v;
           }},
          {"sparsity", [&](const std::string& k, const std::string& v) { cfg.sparsity = parse_double(k, v); }},
          {"sigma2", [&](const std::string& k, const std::string& v) { cfg.sigma2 = parse_double(k, v); }},
          {"epsilon", [&](const std::string& k, const std::string& v) { cfg.epsilon = parse_double(k, v); }},
          {"band", [&](const std::string& k, const std::string& v) { cfg.band = parse_int(k, v); }},
          {"road_dist", [&](const std::string&, const std::string& v) { cfg.road_dist = v; }},
          {"basis",
           [&](const std::string& k, const std::string& v) {
             if (v == "chebyshev") {
               cfg.model.basis = ChebBasis::chebyshev;
             } else if (v == "power") {
               cfg.model.basis = ChebBasis::power;
             } else {
               throw ConfigError("config: " + k + " must be chebyshev or power");
             }
           }},
          {"n_blocks", [&](const std::string& k, const std::string& v) { cfg.model.n_blocks = parse_int(k, v); }},
          {"layers_per_block", [&](const std::string& k, const std::string& v) { cfg.model.layers_per_block = parse_int(k, v); }},
          {"channels", [&](const std::string& k, const std::string& v) { cfg.model.channels = parse_int(k, v); }},
          {"K", [&](const std::string& k, const std::string& v) { cfg.model.K = parse_int(k, v); }},
          {"K_t", [&](const std::string& k, const std::string& v) { cfg.model.K_t = parse_int(k, v); }},
          {"M", [&](const std::string& k, const std::string& v) { cfg.model.M = parse_int(k, v); }},
          {"H", [&](const std::string& k, const std::string& v) { cfg.model.H = parse_int(k, v); }},
          {"output_block",
           [&](const std::string& k, const std::string& v) {
             if (v == "gconv") {
               cfg.model.output_block = OutputBlockKind::gconv;
             } else if (v == "temporal") {
               cfg.model.output_block = OutputBlockKind::temporal;
             } else {
               throw ConfigError("config: " + k + " must be gconv or temporal");
             }
           }},
          {"epochs", [&](const std::string& k, const std::string& v) { cfg.train.epochs = parse_int(k, v); }},
          {"batch_size", [&](const std::string& k, const std::string& v) { cfg.train.batch_size = parse_int(k, v); }},
          {"lr", [&](const std::string& k, const std::string& v) { cfg.train.lr = parse_double(k, v); }},
          {"lr_decay", [&](const std::string& k, const std::string& v) { cfg.train.lr_decay = parse_double(k, v); }},
          {"decay_every", [&](const std::string& k, const std::string& v) { cfg.train.decay_every = parse_int(k, v); }},
          {"seed",
           [&](const std::string& k, const std::string& v) {
             try {
               std::size_t used = 0;
               cfg.train.seed = std::stoull(v, &used);
               if (used != v.size()) throw std::invalid_argument(v);
             } catch (const std::exception&) {
               throw ConfigError("config: key '" + k + "' has non-integer value '" + v + "'");
             }
           }},
          {"workers", [&](const std::string& k, const std::string& v) { cfg.workers = parse_int(k, v); }},
          {"output", [&](const std::string&, const std::string& v) { cfg.output = v; }},
      };

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(line_no) +
                        " is not key=value: '" + stripped + "'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError("config: unknown key '" + key + "' at line " +
                        std::to_string(line_no));
    }
    it->second(key, value);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream out;
  out << "band = " << band << "\n";
  out << "basis = " << (model.basis == ChebBasis::chebyshev ? "chebyshev" : "power") << "\n";
  out << "batch_size = " << train.batch_size << "\n";
  out << "channels = " << model.channels << "\n";
  out << "data = " << data << "\n";
  out << "decay_every = " << train.decay_every << "\n";
  out << "epochs = " << train.epochs << "\n";
  out << "epsilon = " << fmt(epsilon) << "\n";
  out << "graph_kind = " << graph_kind << "\n";
  out << "H = " << model.H << "\n";
  out << "header = " << (header ? "true" : "false") << "\n";
  out << "K = " << model.K << "\n";
  out << "K_t = " << model.K_t << "\n";
  out << "layers_per_block = " << model.layers_per_block << "\n";
  out << "lr = " << fmt(train.lr) << "\n";
  out << "lr_decay = " << fmt(train.lr_decay) << "\n";
  out << "M = " << model.M << "\n";
  out << "n_blocks = " << model.n_blocks << "\n";
  out << "normalization = " << normalization << "\n";
  out << "output = " << output << "\n";
  out << "output_block = " << (model.output_block == OutputBlockKind::gconv ? "gconv" : "temporal") << "\n";
  out << "road_dist = " << road_dist << "\n";
  out << "seed = " << train.seed << "\n";
  out << "sigma2 = " << fmt(sigma2) << "\n";
  out << "sparsity = " << fmt(sparsity) << "\n";
  out << "steps_per_day = " << steps_per_day << "\n";
  out << "train_frac = " << fmt(train_frac) << "\n";
  out << "val_frac = " << fmt(val_frac) << "\n";
  out << "workers = " << workers << "\n";
  return out.str();
}

}  // namespace tgcn
