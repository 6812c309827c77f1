#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crsfl/data.hpp"
#include "crsfl/models.hpp"

namespace crsfl {

struct RoundMetrics {
  std::uint32_t round = 0;
  double train_loss = 0.0;
  std::optional<double> eval_accuracy;  // present per eval cadence
  std::optional<double> eval_ce_loss;
  std::uint64_t download_bytes = 0;  // this round, summed over clients
  std::uint64_t upload_bytes = 0;
  std::uint32_t m = 0;

  friend bool operator==(const RoundMetrics&, const RoundMetrics&) = default;
};

// Eq.-(9)-style overall transmission: (total download + total upload
// bytes) / m over the whole history. Empty history gives 0.
double overall_transmission(const std::vector<RoundMetrics>& history);

// Accuracy gained per mebibyte transmitted: accuracy / ot * 2^20.
double accuracy_per_ot(double final_accuracy, double ot_bytes);

struct EvalResult {
  double accuracy = 0.0;
  double ce_loss = 0.0;
};

// Argmax accuracy (ties to the lowest class index) and mean CE loss.
EvalResult evaluate(const Model& model, const Dataset& test_set);

// CSV columns:
//   round,train_loss,eval_accuracy,eval_ce_loss,download_bytes,
//   upload_bytes,ot_cum,acc_per_ot
// One row per round; eval columns are empty on non-eval rounds. Doubles
// are rendered with 17 significant digits so parsing back is lossless.
void emit_csv(const std::vector<RoundMetrics>& history,
              const std::string& path);

std::string render_csv(const std::vector<RoundMetrics>& history);

// One parsed CSV row; mirrors the emitted columns (m is not a column).
struct CsvRow {
  std::uint32_t round = 0;
  double train_loss = 0.0;
  std::optional<double> eval_accuracy;
  std::optional<double> eval_ce_loss;
  std::uint64_t download_bytes = 0;
  std::uint64_t upload_bytes = 0;
  double ot_cum = 0.0;
  std::optional<double> acc_per_ot;

  friend bool operator==(const CsvRow&, const CsvRow&) = default;
};

// Inverse of render_csv on its own output.
std::vector<CsvRow> parse_csv(const std::string& text);

}  // namespace crsfl
