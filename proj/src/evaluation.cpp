#include "flood/evaluation.hpp"

#include "flood/error.hpp"

namespace flood {

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

void finish(EvalReport& r) {
  r.srr = ratio(r.some.hits, r.wet_total);
  r.hrp = ratio(r.highest.hits, r.highest.predicted);
  r.rar = ratio(r.some.predicted, r.highest.predicted);
}

std::string fmt(const std::optional<double>& v) { return v ? format_double(*v) : "undefined"; }

}  // namespace

EvalReport evaluate(const RiskMap& risk, const MaskGrid& truth_wet, const MaskGrid& valid) {
  const auto& geo = risk.some.geo();
  if (!(truth_wet.geo() == geo) || !(valid.geo() == geo) || !(risk.higher.geo() == geo) ||
      !(risk.highest.geo() == geo)) {
    throw ValidationError("forecast and ground truth differ in geometry");
  }
  EvalReport r;
  for (std::size_t i = 0; i < geo.size(); ++i) {
    if (!valid[i]) continue;
    ++r.n_valid;
    const bool wet = truth_wet[i];
    r.wet_total += wet;
    auto tally = [&](RegionCounts& c, bool in) {
      c.predicted += in;
      c.hits += in && wet;
    };
    tally(r.some, risk.some[i]);
    tally(r.higher, risk.higher[i]);
    tally(r.highest, risk.highest[i]);
  }
  finish(r);
  r.srr_count = r.srr ? 1 : 0;
  r.hrp_count = r.hrp ? 1 : 0;
  r.rar_count = r.rar ? 1 : 0;
  return r;
}

EvalReport evaluate(const RiskMap& risk, const MaskGrid& truth_wet) {
  return evaluate(risk, truth_wet, MaskGrid(risk.some.geo(), true));
}

EvalReport aggregate(const std::vector<EvalReport>& reports, Weighting weighting) {
  if (reports.empty()) throw ValidationError("cannot aggregate an empty list of reports");
  EvalReport out;
  for (const auto& r : reports) {
    for (auto [dst, src] : {std::pair{&out.some, &r.some}, {&out.higher, &r.higher}, {&out.highest, &r.highest}}) {
      dst->hits += src->hits;
      dst->predicted += src->predicted;
    }
    out.wet_total += r.wet_total;
    out.n_valid += r.n_valid;
  }

  if (weighting == Weighting::per_pixel) {
    finish(out);
    out.srr_count = out.srr ? 1 : 0;
    out.hrp_count = out.hrp ? 1 : 0;
    out.rar_count = out.rar ? 1 : 0;
    return out;
  }

  auto mean = [&](std::optional<double> EvalReport::*metric, std::size_t& count) -> std::optional<double> {
    double sum = 0.0;
    count = 0;
    for (const auto& r : reports) {
      if (const auto& v = r.*metric) {
        sum += *v;
        ++count;
      }
    }
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
  };
  out.srr = mean(&EvalReport::srr, out.srr_count);
  out.hrp = mean(&EvalReport::hrp, out.hrp_count);
  out.rar = mean(&EvalReport::rar, out.rar_count);
  return out;
}

std::string to_text(const EvalReport& r) {
  std::string s;
  s += "srr: " + fmt(r.srr) + "\n";
  s += "hrp: " + fmt(r.hrp) + "\n";
  s += "rar: " + fmt(r.rar) + "\n";
  s += "srr_contributors: " + std::to_string(r.srr_count) + "\n";
  s += "hrp_contributors: " + std::to_string(r.hrp_count) + "\n";
  s += "rar_contributors: " + std::to_string(r.rar_count) + "\n";
  s += "n_valid: " + std::to_string(r.n_valid) + "\n";
  s += "wet_total: " + std::to_string(r.wet_total) + "\n";
  s += "some_hits: " + std::to_string(r.some.hits) + "\n";
  s += "some_predicted: " + std::to_string(r.some.predicted) + "\n";
  s += "higher_hits: " + std::to_string(r.higher.hits) + "\n";
  s += "higher_predicted: " + std::to_string(r.higher.predicted) + "\n";
  s += "highest_hits: " + std::to_string(r.highest.hits) + "\n";
  s += "highest_predicted: " + std::to_string(r.highest.predicted) + "\n";
  return s;
}

std::string csv_header() {
  return "event,srr,hrp,rar,n_valid,wet_total,some_hits,some_predicted,higher_hits,higher_predicted,"
         "highest_hits,highest_predicted\n";
}

std::string to_csv_row(const std::string& label, const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  return label + "," + opt(r.srr) + "," + opt(r.hrp) + "," + opt(r.rar) + "," + std::to_string(r.n_valid) + "," +
         std::to_string(r.wet_total) + "," + std::to_string(r.some.hits) + "," + std::to_string(r.some.predicted) +
         "," + std::to_string(r.higher.hits) + "," + std::to_string(r.higher.predicted) + "," +
         std::to_string(r.highest.hits) + "," + std::to_string(r.highest.predicted) + "\n";
}

}  // namespace flood
