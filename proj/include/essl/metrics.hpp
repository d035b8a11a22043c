#pragma once

// Benchmark ingestion and the inverse-accuracy-gap metrics that turn linear
// probing results into the payoffs of the two-population game.
//
// All accuracies stay on the percent scale used by published tables, so a
// metric such as 1/(99.37 - 83.0) can be checked by hand.

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace essl {

struct AccuracyRecord {
  std::string method;
  std::string pretrain;
  std::string eval;
  double accuracy = 0.0;  // percent, [0, 100]

  bool operator==(const AccuracyRecord&) const = default;
};

// Method name reserved for supervised reference rows (pretrain == eval).
inline constexpr std::string_view kSupervisedMethod = "SL";

// Methods whose name starts with this prefix are ensembles of a
// generalizability and a discriminability model.
inline constexpr std::string_view kEnsemblePrefix = "ESSL";

struct BenchmarkTable {
  std::map<std::string, double, std::less<>> sl_accuracies;
  std::vector<AccuracyRecord> ssl_accuracies;
  std::vector<AccuracyRecord> ensemble_accuracies;

  // Throws LookupError naming the missing triple.
  double sl(std::string_view dataset) const;
  double ssl(std::string_view method, std::string_view pretrain, std::string_view eval) const;
  double ensemble(std::string_view method, std::string_view pretrain, std::string_view eval) const;

  bool operator==(const BenchmarkTable&) const = default;
};

struct PayoffParams {
  double g1 = 0.0;
  double d1 = 0.0;
  double g2 = 0.0;
  double d2 = 0.0;
  double n1 = 0.0;
  double n2 = 0.0;
  double w1 = 1.0;
  double w2 = 1.0;

  // Gains strictly positive and weights nonnegative.
  bool satisfies_invariants() const noexcept;

  bool operator==(const PayoffParams&) const = default;
};

// Sink for non-fatal diagnostics such as a clamped accuracy gap.
using WarningLog = std::vector<std::string>;

// Denominator floor applied when SSL gets within this many percent points of
// (or beats) supervised learning.
inline constexpr double kMinAccuracyGap = 0.1;

BenchmarkTable parse_benchmark(std::string_view csv);
BenchmarkTable load_benchmark(const std::filesystem::path& path);
// Canonical CSV: header, SL rows by dataset, then SSL and ensemble rows in
// stored order. Accuracies use the shortest exact decimal form.
std::string serialize_benchmark(const BenchmarkTable& table);

// 1 / (sl_acc - ssl_acc) with the gap floored at kMinAccuracyGap.
double generalizability(double sl_acc, double ssl_acc, WarningLog* warnings = nullptr);
// Same form, meant for homogeneous (pretrain == eval) records.
double discriminability(double sl_acc, double ssl_acc, WarningLog* warnings = nullptr);

struct NegativeImpacts {
  double n1 = 0.0;
  double n2 = 0.0;
};

// n1 = SL(d') - ens(d -> d'), n2 = SSL_gen(d -> d') - ens(d -> d'). Signs are
// kept as computed.
NegativeImpacts negative_impacts(const BenchmarkTable& table, std::string_view gen_method,
                                 std::string_view ens_method, std::string_view d,
                                 std::string_view d_prime);

// Which rows of a table form one game: the generalizability model, the
// discriminability model, their ensemble, the pre-training dataset and the
// transfer dataset.
struct GamePairing {
  std::string gen_method;
  std::string dis_method;
  std::string ens_method;
  std::string pretrain;
  std::string transfer;
};

struct PayoffTuple {
  double g1 = 0.0;
  double d1 = 0.0;
  double g2 = 0.0;
  double d2 = 0.0;
  double n1 = 0.0;
  double n2 = 0.0;
};

PayoffTuple payoff_tuple(const BenchmarkTable& table, const GamePairing& pairing,
                         WarningLog* warnings = nullptr);

// Unweighted mean of each component; w1 and w2 pass through.
PayoffParams payoff_from_tuples(std::span<const PayoffTuple> tuples, double w1, double w2);
PayoffParams payoff_from_benchmarks(std::span<const BenchmarkTable> tables,
                                    const GamePairing& pairing, double w1, double w2,
                                    WarningLog* warnings = nullptr);

// `key = value` file with keys g1,d1,g2,d2,n1,n2,w1,w2. On read, w1/w2 default
// to 1 when absent; every other key is required and unknown keys are errors.
std::string serialize_payoff(const PayoffParams& p);
PayoffParams parse_payoff(std::string_view text);
PayoffParams load_payoff(const std::filesystem::path& path);

}  // namespace essl
