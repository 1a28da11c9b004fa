#include "tgcn/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "tgcn/errors.hpp"

namespace tgcn {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<double> split_doubles(const std::string& line, const std::string& where) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    const std::string cell = line.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
    } catch (const std::exception&) {
      throw DataError(where + ": non-numeric cell '" + cell + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

void save_distance_matrix(const std::string& path, const DistanceMatrix& d) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (std::int64_t i = 0; i < d.n; ++i) {
    for (std::int64_t j = 0; j < d.n; ++j) {
      if (j) out << ',';
      out << fmt(d.at(i, j));
    }
    out << '\n';
  }
}

DistanceMatrix load_distance_matrix(const std::string& path) {
  const DenseArray m = load_matrix_csv(path);
  if (m.dim(0) != m.dim(1)) throw DataError(path + ": distance matrix must be square");
  DistanceMatrix d;
  d.n = m.dim(0);
  d.values.assign(m.data(), m.data() + m.size());
  return d;
}

void save_adjacency(const std::string& path, const Adjacency& w) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "# n=" << w.n << " kind="
      << (w.kind == GraphKind::temporal ? "temporal" : "spatial") << "\n";
  for (const auto& e : w.edges) {
    out << e.i << ',' << e.j << ',' << fmt(e.w) << '\n';
  }
}

Adjacency load_adjacency(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open graph file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty graph file");

  Adjacency w;
  std::int64_t n = -1;
  char kind_buf[16] = {0};
  if (std::sscanf(line.c_str(), "# n=%lld kind=%15s",
                  reinterpret_cast<long long*>(&n), kind_buf) != 2 ||
      n < 1) {
    throw DataError(path + ": malformed header line '" + line + "'");
  }
  const std::string kind(kind_buf);
  if (kind != "temporal" && kind != "spatial") {
    throw DataError(path + ": unknown graph kind '" + kind + "'");
  }
  w.n = n;
  w.kind = kind == "temporal" ? GraphKind::temporal : GraphKind::spatial;

  std::int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    long long i = -1, j = -1;
    double weight = 0.0;
    if (std::sscanf(line.c_str(), "%lld,%lld,%lf", &i, &j, &weight) != 3) {
      throw DataError(path + ": malformed edge at line " + std::to_string(line_no));
    }
    if (i < 0 || j <= i || j >= n) {
      throw DataError(path + ": edge indices out of range at line " +
                      std::to_string(line_no));
    }
    w.edges.push_back({i, j, weight});
  }
  return w;
}

void save_norm_stats(const std::string& path, const NormStats& stats) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "mean=";
  for (std::size_t i = 0; i < stats.mean.size(); ++i) {
    if (i) out << ',';
    out << fmt(stats.mean[i]);
  }
  out << "\nstd=";
  for (std::size_t i = 0; i < stats.stdev.size(); ++i) {
    if (i) out << ',';
    out << fmt(stats.stdev[i]);
  }
  out << "\n";
}

NormStats load_norm_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open norm stats: " + path);
  std::string mean_line, std_line;
  if (!std::getline(in, mean_line) || !std::getline(in, std_line) ||
      mean_line.rfind("mean=", 0) != 0 || std_line.rfind("std=", 0) != 0) {
    throw DataError(path + ": expected 'mean=...' and 'std=...' lines");
  }
  NormStats stats;
  stats.mean = split_doubles(mean_line.substr(5), path);
  stats.stdev = split_doubles(std_line.substr(4), path);
  if (stats.mean.size() != stats.stdev.size() || stats.mean.empty()) {
    throw DataError(path + ": mean/std length mismatch");
  }
  return stats;
}

void save_history_csv(const std::string& path,
                      const std::vector<EpochStats>& history) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "epoch,lr,train_loss,val_loss,val_mae\n";
  for (const auto& e : history) {
    out << e.epoch << ',' << fmt(e.lr) << ',' << fmt(e.train_loss) << ','
        << fmt(e.val_loss) << ',' << fmt(e.val_mae) << '\n';
  }
}

void save_predictions_csv(const std::string& path, const DenseArray& pred) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  const std::int64_t rows = pred.dim(0);
  const std::int64_t cols = pred.size() / rows;
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) {
      if (c) out << ',';
      out << fmt(pred[r * cols + c]);
    }
    out << '\n';
  }
}

DenseArray load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    rows.push_back(split_doubles(line, path + ":" + std::to_string(line_no)));
    if (rows.size() > 1 && rows.back().size() != rows.front().size()) {
      throw DataError(path + ": ragged row at line " + std::to_string(line_no));
    }
  }
  if (rows.empty()) throw DataError(path + ": empty file");
  DenseArray out({static_cast<std::int64_t>(rows.size()),
                  static_cast<std::int64_t>(rows.front().size())});
  std::int64_t idx = 0;
  for (const auto& r : rows) {
    for (const double v : r) out[idx++] = v;
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << content;
}

std::uint64_t fingerprint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for fingerprint: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (got < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  return h;
}

}  // namespace tgcn
