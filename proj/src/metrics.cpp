#include "essl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "essl/error.hpp"
#include "essl/text_io.hpp"

namespace essl {

namespace {

constexpr std::string_view kHeader = "method,pretrain,eval,accuracy";

std::string triple_name(std::string_view method, std::string_view pretrain,
                        std::string_view eval) {
  return std::string(method) + "(" + std::string(pretrain) + " -> " + std::string(eval) + ")";
}

const AccuracyRecord* find_record(const std::vector<AccuracyRecord>& records,
                                  std::string_view method, std::string_view pretrain,
                                  std::string_view eval) {
  auto it = std::find_if(records.begin(), records.end(), [&](const AccuracyRecord& r) {
    return r.method == method && r.pretrain == pretrain && r.eval == eval;
  });
  return it == records.end() ? nullptr : &*it;
}

bool is_ensemble(std::string_view method) { return method.starts_with(kEnsemblePrefix); }

double inverse_gap(double sl_acc, double ssl_acc, WarningLog* warnings) {
  double gap = sl_acc - ssl_acc;
  if (gap < kMinAccuracyGap) {
    if (warnings) {
      warnings->push_back("accuracy gap " + format_double(gap) + " (SL " + format_double(sl_acc) +
                          ", SSL " + format_double(ssl_acc) + ") floored at " +
                          format_double(kMinAccuracyGap));
    }
    gap = kMinAccuracyGap;
  }
  return 1.0 / gap;
}

}  // namespace

bool PayoffParams::satisfies_invariants() const noexcept {
  return g1 > 0 && d1 > 0 && g2 > 0 && d2 > 0 && w1 >= 0 && w2 >= 0 && std::isfinite(n1) &&
         std::isfinite(n2) && std::isfinite(g1 + d1 + g2 + d2 + w1 + w2);
}

double BenchmarkTable::sl(std::string_view dataset) const {
  auto it = sl_accuracies.find(dataset);
  if (it == sl_accuracies.end()) {
    throw LookupError("missing record " +
                      triple_name(kSupervisedMethod, dataset, dataset));
  }
  return it->second;
}

double BenchmarkTable::ssl(std::string_view method, std::string_view pretrain,
                           std::string_view eval) const {
  const auto* r = find_record(ssl_accuracies, method, pretrain, eval);
  if (!r) throw LookupError("missing record " + triple_name(method, pretrain, eval));
  return r->accuracy;
}

double BenchmarkTable::ensemble(std::string_view method, std::string_view pretrain,
                                std::string_view eval) const {
  const auto* r = find_record(ensemble_accuracies, method, pretrain, eval);
  if (!r) throw LookupError("missing record " + triple_name(method, pretrain, eval));
  return r->accuracy;
}

BenchmarkTable parse_benchmark(std::string_view csv) {
  BenchmarkTable table;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  bool have_header = false;
  std::size_t line_no = 0;

  for (auto raw : split(csv, '\n')) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty()) continue;
    if (!have_header) {
      if (line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
      if (line != kHeader) {
        throw ParseError(line_no, "expected header '" + std::string(kHeader) + "'");
      }
      have_header = true;
      continue;
    }

    auto fields = split(line, ',');
    if (fields.size() != 4) {
      throw ParseError(line_no, "expected 4 fields, found " + std::to_string(fields.size()));
    }
    AccuracyRecord rec{std::string(trim(fields[0])), std::string(trim(fields[1])),
                       std::string(trim(fields[2])), 0.0};
    if (rec.method.empty() || rec.pretrain.empty() || rec.eval.empty()) {
      throw ParseError(line_no, "empty identifier");
    }
    try {
      rec.accuracy = parse_double(fields[3]);
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
    if (rec.accuracy < 0.0 || rec.accuracy > 100.0) {
      throw ParseError(line_no, "accuracy " + format_double(rec.accuracy) +
                                    " outside [0, 100]");
    }
    if (!seen.emplace(rec.method, rec.pretrain, rec.eval).second) {
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate record " +
                            triple_name(rec.method, rec.pretrain, rec.eval));
    }

    if (rec.method == kSupervisedMethod) {
      if (rec.pretrain != rec.eval) {
        throw ParseError(line_no, "SL rows need pretrain == eval");
      }
      table.sl_accuracies.emplace(rec.eval, rec.accuracy);
    } else if (is_ensemble(rec.method)) {
      table.ensemble_accuracies.push_back(std::move(rec));
    } else {
      table.ssl_accuracies.push_back(std::move(rec));
    }
  }

  if (table.sl_accuracies.empty()) throw ValidationError("benchmark has no SL entries");
  for (const auto* records : {&table.ssl_accuracies, &table.ensemble_accuracies}) {
    for (const auto& r : *records) {
      if (!table.sl_accuracies.contains(r.eval)) {
        throw ValidationError("no SL accuracy for eval dataset '" + r.eval + "' referenced by " +
                              triple_name(r.method, r.pretrain, r.eval));
      }
    }
  }
  return table;
}

BenchmarkTable load_benchmark(const std::filesystem::path& path) {
  return parse_benchmark(read_file(path));
}

std::string serialize_benchmark(const BenchmarkTable& table) {
  std::string out(kHeader);
  out += '\n';
  const auto row = [&out](std::string_view m, std::string_view p, std::string_view e, double a) {
    out.append(m).append(",").append(p).append(",").append(e).append(",");
    out += format_double(a);
    out += '\n';
  };
  for (const auto& [dataset, acc] : table.sl_accuracies) row(kSupervisedMethod, dataset, dataset, acc);
  for (const auto& r : table.ssl_accuracies) row(r.method, r.pretrain, r.eval, r.accuracy);
  for (const auto& r : table.ensemble_accuracies) row(r.method, r.pretrain, r.eval, r.accuracy);
  return out;
}

double generalizability(double sl_acc, double ssl_acc, WarningLog* warnings) {
  return inverse_gap(sl_acc, ssl_acc, warnings);
}

double discriminability(double sl_acc, double ssl_acc, WarningLog* warnings) {
  return inverse_gap(sl_acc, ssl_acc, warnings);
}

NegativeImpacts negative_impacts(const BenchmarkTable& table, std::string_view gen_method,
                                 std::string_view ens_method, std::string_view d,
                                 std::string_view d_prime) {
  const double ens = table.ensemble(ens_method, d, d_prime);
  return {table.sl(d_prime) - ens, table.ssl(gen_method, d, d_prime) - ens};
}

PayoffTuple payoff_tuple(const BenchmarkTable& table, const GamePairing& pairing,
                         WarningLog* warnings) {
  const auto& p = pairing;
  const double sl_home = table.sl(p.pretrain);
  const double sl_transfer = table.sl(p.transfer);
  PayoffTuple t;
  t.g1 = generalizability(sl_transfer, table.ssl(p.gen_method, p.pretrain, p.transfer), warnings);
  t.d1 = discriminability(sl_home, table.ssl(p.gen_method, p.pretrain, p.pretrain), warnings);
  t.g2 = generalizability(sl_transfer, table.ssl(p.dis_method, p.pretrain, p.transfer), warnings);
  t.d2 = discriminability(sl_home, table.ssl(p.dis_method, p.pretrain, p.pretrain), warnings);
  auto impacts = negative_impacts(table, p.gen_method, p.ens_method, p.pretrain, p.transfer);
  t.n1 = impacts.n1;
  t.n2 = impacts.n2;
  return t;
}

PayoffParams payoff_from_tuples(std::span<const PayoffTuple> tuples, double w1, double w2) {
  if (tuples.empty()) throw ValidationError("payoff averaging needs at least one table");
  PayoffParams p;
  for (const auto& t : tuples) {
    p.g1 += t.g1;
    p.d1 += t.d1;
    p.g2 += t.g2;
    p.d2 += t.d2;
    p.n1 += t.n1;
    p.n2 += t.n2;
  }
  const double n = static_cast<double>(tuples.size());
  p.g1 /= n;
  p.d1 /= n;
  p.g2 /= n;
  p.d2 /= n;
  p.n1 /= n;
  p.n2 /= n;
  p.w1 = w1;
  p.w2 = w2;
  return p;
}

PayoffParams payoff_from_benchmarks(std::span<const BenchmarkTable> tables,
                                    const GamePairing& pairing, double w1, double w2,
                                    WarningLog* warnings) {
  if (tables.empty()) throw ValidationError("payoff averaging needs at least one table");
  std::vector<PayoffTuple> tuples;
  tuples.reserve(tables.size());
  for (const auto& t : tables) tuples.push_back(payoff_tuple(t, pairing, warnings));
  return payoff_from_tuples(tuples, w1, w2);
}

std::string serialize_payoff(const PayoffParams& p) {
  return format_key_values({{"g1", format_double(p.g1)},
                            {"d1", format_double(p.d1)},
                            {"g2", format_double(p.g2)},
                            {"d2", format_double(p.d2)},
                            {"n1", format_double(p.n1)},
                            {"n2", format_double(p.n2)},
                            {"w1", format_double(p.w1)},
                            {"w2", format_double(p.w2)}});
}

PayoffParams parse_payoff(std::string_view text) {
  auto kv = parse_key_values(text);
  PayoffParams p;
  const std::pair<const char*, double*> fields[] = {
      {"g1", &p.g1}, {"d1", &p.d1}, {"g2", &p.g2}, {"d2", &p.d2},
      {"n1", &p.n1}, {"n2", &p.n2}, {"w1", &p.w1}, {"w2", &p.w2}};
  for (const auto& [key, _] : kv) {
    bool known = std::any_of(std::begin(fields), std::end(fields),
                             [&](const auto& f) { return key == f.first; });
    if (!known) throw ValidationError("unknown payoff key '" + key + "'");
  }
  for (const auto& [key, slot] : fields) {
    auto it = kv.find(std::string_view(key));
    if (it == kv.end()) {
      if (std::string_view(key) == "w1" || std::string_view(key) == "w2") continue;
      throw ValidationError(std::string("missing payoff key '") + key + "'");
    }
    try {
      *slot = parse_double(it->second);
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("payoff key '") + key + "': " + e.what());
    }
  }
  if (p.w1 < 0 || p.w2 < 0) throw ValidationError("preference weights must be nonnegative");
  return p;
}

PayoffParams load_payoff(const std::filesystem::path& path) {
  return parse_payoff(read_file(path));
}

}  // namespace essl
