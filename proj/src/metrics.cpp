#include "crsfl/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace crsfl {

double overall_transmission(const std::vector<RoundMetrics>& history) {
  if (history.empty()) return 0.0;
  std::uint32_t m = history.front().m;
  std::uint64_t down = 0, up = 0;
  for (const RoundMetrics& r : history) {
    if (r.m != m) {
      throw std::invalid_argument(
          "overall_transmission: client count changed mid-history");
    }
    down += r.download_bytes;
    up += r.upload_bytes;
  }
  return static_cast<double>(down + up) / static_cast<double>(m);
}

double accuracy_per_ot(double final_accuracy, double ot_bytes) {
  if (!(ot_bytes > 0.0)) {
    throw std::invalid_argument("accuracy_per_ot: ot must be positive");
  }
  return final_accuracy / ot_bytes * 1048576.0;
}

EvalResult evaluate(const Model& model, const Dataset& test_set) {
  if (test_set.n == 0) {
    throw std::invalid_argument("evaluate: empty test set");
  }
  std::vector<double> z(model.c);
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::uint32_t i = 0; i < test_set.n; ++i) {
    logits(model, test_set.row(i), z);
    std::uint32_t best = 0;
    double zmax = z[0];
    for (std::uint32_t j = 1; j < model.c; ++j) {
      if (z[j] > zmax) {  // strict: ties resolve to the lowest index
        zmax = z[j];
        best = j;
      }
    }
    double s = 0.0;
    for (double v : z) s += std::exp(v - zmax);
    loss -= z[test_set.labels[i]] - zmax - std::log(s);
    if (static_cast<std::int32_t>(best) == test_set.labels[i]) ++correct;
  }
  EvalResult out;
  out.accuracy = static_cast<double>(correct) / test_set.n;
  out.ce_loss = loss / test_set.n;
  return out;
}

namespace {

constexpr char kHeader[] =
    "round,train_loss,eval_accuracy,eval_ce_loss,download_bytes,"
    "upload_bytes,ot_cum,acc_per_ot";

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string render_csv(const std::vector<RoundMetrics>& history) {
  std::string out = kHeader;
  out += '\n';
  std::uint64_t down = 0, up = 0;
  for (const RoundMetrics& r : history) {
    down += r.download_bytes;
    up += r.upload_bytes;
    double ot_cum =
        static_cast<double>(down + up) / static_cast<double>(r.m);
    out += std::to_string(r.round);
    out += ',';
    out += fmt_double(r.train_loss);
    out += ',';
    if (r.eval_accuracy) out += fmt_double(*r.eval_accuracy);
    out += ',';
    if (r.eval_ce_loss) out += fmt_double(*r.eval_ce_loss);
    out += ',';
    out += std::to_string(r.download_bytes);
    out += ',';
    out += std::to_string(r.upload_bytes);
    out += ',';
    out += fmt_double(ot_cum);
    out += ',';
    if (r.eval_accuracy) {
      out += fmt_double(accuracy_per_ot(*r.eval_accuracy, ot_cum));
    }
    out += '\n';
  }
  return out;
}

void emit_csv(const std::vector<RoundMetrics>& history,
              const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("emit_csv: cannot open " + path);
  }
  out << render_csv(history);
  if (!out) {
    throw std::runtime_error("emit_csv: write failed for " + path);
  }
}

std::vector<CsvRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw std::runtime_error("parse_csv: bad header");
  }
  std::vector<CsvRow> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        cells.push_back(line.substr(start));
        break;
      }
      cells.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (cells.size() != 8) {
      throw std::runtime_error("parse_csv: bad row: " + line);
    }
    CsvRow r;
    r.round = static_cast<std::uint32_t>(std::stoul(cells[0]));
    r.train_loss = std::stod(cells[1]);
    if (!cells[2].empty()) r.eval_accuracy = std::stod(cells[2]);
    if (!cells[3].empty()) r.eval_ce_loss = std::stod(cells[3]);
    r.download_bytes = std::stoull(cells[4]);
    r.upload_bytes = std::stoull(cells[5]);
    r.ot_cum = std::stod(cells[6]);
    if (!cells[7].empty()) r.acc_per_ot = std::stod(cells[7]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace crsfl
