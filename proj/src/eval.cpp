#include "yinyang/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

namespace yinyang {

std::vector<double> sd_pair_scores(const PairModel& sd, std::span<const Phrase> phrases) {
  if (phrases.size() < 2) throw DataError("SD score needs at least two phrases");
  std::vector<double> scores;
  scores.reserve(phrases.size() - 1);
  for (std::size_t i = 1; i < phrases.size(); ++i) scores.push_back(sd.score(phrases[0], phrases[i]));
  return scores;
}

double sd_score(const PairModel& sd, std::span<const Phrase> phrases) {
  const auto scores = sd_pair_scores(sd, phrases);
  double sum = 0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

Eigen::MatrixXd build_similarity_matrix(const PairModel& sd, std::span<const Phrase> phrases) {
  if (phrases.size() < 2) throw DataError("similarity matrix needs at least two phrases");
  const auto n = static_cast<Eigen::Index>(phrases.size() - 1);
  std::vector<Eigen::VectorXd> unit;
  for (std::size_t i = 1; i < phrases.size(); ++i) {
    Eigen::VectorXd e = sd.embed(phrases[0], phrases[i]);
    const double norm = e.norm();
    if (!(norm > 0)) throw DataError("zero-norm embedding for pair (1, " + std::to_string(i + 1) + ")");
    unit.push_back(e / norm);
  }
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < n; ++k) {
      m(j, k) = std::clamp(unit[static_cast<std::size_t>(j)].dot(unit[static_cast<std::size_t>(k)]), -1.0, 1.0);
    }
  }
  Eigen::MatrixXd sym = (m + m.transpose()) / 2.0;
  sym.diagonal().setOnes();
  return sym;
}

PitchMetrics pitch_metrics(std::span<const Phrase> phrases) {
  if (phrases.empty()) throw DataError("pitch metrics need at least one phrase");
  PitchMetrics out;
  for (const auto& p : phrases) {
    const auto pitches = p.pitches();
    if (pitches.empty()) throw DataError("pitch metrics need nonempty phrases");
    const auto [lo, hi] = std::minmax_element(pitches.begin(), pitches.end());
    out.pitch_range += *hi - *lo;
    out.unique_pitches += static_cast<double>(std::set<int>(pitches.begin(), pitches.end()).size());
  }
  out.pitch_range /= static_cast<double>(phrases.size());
  out.unique_pitches /= static_cast<double>(phrases.size());
  return out;
}

MetricsReport evaluate_piece(const PairModel& sd, std::span<const Phrase> phrases, std::string name) {
  MetricsReport r;
  r.name = std::move(name);
  const auto scores = sd_pair_scores(sd, phrases);
  double sum = 0;
  for (double s : scores) sum += s;
  r.sd = sum / static_cast<double>(scores.size());
  r.vendi = vendi_score(build_similarity_matrix(sd, phrases));
  const PitchMetrics pm = pitch_metrics(phrases);
  r.pitch_range = pm.pitch_range;
  r.unique_pitches = pm.unique_pitches;
  for (std::size_t i = 1; i < phrases.size(); ++i) {
    const auto single = pitch_metrics(phrases.subspan(i, 1));
    r.pairs.push_back(PairDetail{i, scores[i - 1], static_cast<int>(single.pitch_range),
                                 static_cast<int>(single.unique_pitches)});
  }
  return r;
}

MetricsReport aggregate(std::span<const MetricsReport> reports, std::string name) {
  if (reports.empty()) throw DataError("nothing to aggregate");
  MetricsReport m;
  m.name = std::move(name);
  for (const auto& r : reports) {
    m.sd += r.sd;
    m.vendi += r.vendi;
    m.pitch_range += r.pitch_range;
    m.unique_pitches += r.unique_pitches;
  }
  const auto n = static_cast<double>(reports.size());
  m.sd /= n;
  m.vendi /= n;
  m.pitch_range /= n;
  m.unique_pitches /= n;
  return m;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j{{"name", name}, {"sd", sd}, {"vendi", vendi}, {"pitch_range", pitch_range},
                   {"unique_pitches", unique_pitches}, {"pairs", nlohmann::json::array()}};
  for (const auto& p : pairs) {
    j["pairs"].push_back({{"phrase_index", p.phrase_index},
                          {"sd_probability", p.sd_probability},
                          {"pitch_range", p.pitch_range},
                          {"unique_pitches", p.unique_pitches}});
  }
  return j;
}

std::string metrics_table(std::span<const MetricsReport> reports) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %8s %8s %8s %8s\n", "Model", "SD", "V", "PR", "UP");
  out << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-24s %8.2f %8.2f %8.2f %8.2f\n", r.name.c_str(), r.sd, r.vendi, r.pitch_range,
                  r.unique_pitches);
    out << line;
  }
  return out.str();
}

}  // namespace yinyang
