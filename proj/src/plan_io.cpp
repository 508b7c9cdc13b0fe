#include <cstdio>
#include <fstream>
#include <sstream>

#include "yinyang/corpus.hpp"
#include "yinyang/midi.hpp"
#include "yinyang/orchestrator.hpp"
#include "yinyang/transforms.hpp"

namespace yinyang {

using nlohmann::json;

namespace {

std::string_view slot_name(SlotLabel label) {
  switch (label) {
    case SlotLabel::motif: return "motif";
    case SlotLabel::generator: return "generator";
    case SlotLabel::refiner: return "refiner";
    case SlotLabel::section_seed: return "section_seed";
  }
  return "motif";
}

SlotLabel parse_slot(std::string_view text) {
  for (auto s : {SlotLabel::motif, SlotLabel::generator, SlotLabel::refiner, SlotLabel::section_seed}) {
    if (slot_name(s) == text) return s;
  }
  throw DataError("unknown phrase source '" + std::string(text) + "'");
}

int parse_int(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw DataError(std::string("invalid ") + what + " '" + text + "'");
  }
}

}  // namespace

std::vector<SectionSpec> parse_form(const std::string& text) {
  std::vector<SectionSpec> form;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos || colon == 0) throw DataError("form entries look like A:4, got '" + item + "'");
    form.push_back(SectionSpec{item.substr(0, colon), parse_int(item.substr(colon + 1), "phrase count")});
  }
  if (form.empty()) throw DataError("empty form");
  return form;
}

std::string format_form(std::span<const SectionSpec> form) {
  std::string out;
  for (const auto& s : form) {
    if (!out.empty()) out += ',';
    out += s.label + ':' + std::to_string(s.phrases);
  }
  return out;
}

GrRatio parse_gr_ratio(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw DataError("G:R ratio looks like 2:1, got '" + text + "'");
  return GrRatio{parse_int(text.substr(0, colon), "G count"), parse_int(text.substr(colon + 1), "R count")};
}

std::size_t GenerationPlan::phrase_count() const {
  std::size_t n = 0;
  for (const auto& s : form) n += static_cast<std::size_t>(s.phrases);
  return n;
}

void GenerationPlan::validate() const {
  if (form.empty()) throw DataError("the plan has no sections");
  for (const auto& s : form) {
    if (s.label.empty()) throw DataError("section labels must be nonempty");
    if (s.phrases < 1) throw DataError("section " + s.label + " needs at least one phrase");
  }
  if (gr_ratio.generator < 0 || gr_ratio.refiner < 0 || gr_ratio.generator + gr_ratio.refiner == 0) {
    throw DataError("G:R ratio components must be nonnegative and not both zero");
  }
  if (temperatures.empty()) throw DataError("pool size K must be at least 1");
  for (double t : temperatures) {
    if (!(t > 0)) throw DataError("temperatures must be positive");
  }
  if (max_new_tokens < 4) throw DataError("max_new_tokens too small for a phrase");
  const auto [lo, hi] = new_section_motif_length;
  if (lo < 1 || hi < lo || hi > max_new_tokens / 3) {
    throw DataError("new-section motif length range must lie within 1 and the decoder capacity");
  }
  if (refiner_context_bars < 1) throw DataError("refiner context must be at least one bar");

  // Overrides must target R (High similarity) or S (Low similarity) slots.
  std::map<std::string, bool> seen;
  std::size_t start = 0;
  std::vector<std::size_t> section_starts;
  std::vector<std::vector<SlotLabel>> schedules;
  for (std::size_t s = 0; s < form.size(); ++s) {
    const bool first = s == 0 || seen.count(form[s].label);
    seen[form[s].label] = true;
    schedules.push_back(schedule_section(form[s].phrases, gr_ratio, first));
    section_starts.push_back(start);
    start += static_cast<std::size_t>(form[s].phrases);
  }
  for (const auto& [where, kind] : overrides) {
    const auto [section, slot] = where;
    if (section >= form.size() || slot < 0 || slot >= form[section].phrases) {
      throw DataError("transformation override points outside the form");
    }
    const SlotLabel label = schedules[section][static_cast<std::size_t>(slot)];
    if (label == SlotLabel::refiner && similarity_of(kind) != Similarity::high) {
      throw DataError("within-section override '" + std::string(to_string(kind)) + "' is not a High-similarity kind");
    }
    if (label == SlotLabel::section_seed && similarity_of(kind) != Similarity::low) {
      throw DataError("section-seed override '" + std::string(to_string(kind)) + "' is not a Low-similarity kind");
    }
    if (label != SlotLabel::refiner && label != SlotLabel::section_seed) {
      throw DataError("transformation override on a slot that is not refined");
    }
  }
  for (const auto& [section, phrase] : seed_sources) {
    if (section >= form.size() || schedules[section].front() != SlotLabel::section_seed) {
      throw DataError("seed source given for a section that is not seeded");
    }
    if (phrase >= section_starts[section]) throw DataError("seed source must be an earlier phrase");
  }
}

json GenerationPlan::to_json() const {
  json j{{"form", format_form(form)},
         {"gr_ratio", std::to_string(gr_ratio.generator) + ":" + std::to_string(gr_ratio.refiner)},
         {"temperatures", temperatures},
         {"new_section_motif_length", {new_section_motif_length.first, new_section_motif_length.second}},
         {"refiner_context_bars", refiner_context_bars},
         {"use_selector", use_selector},
         {"max_new_tokens", max_new_tokens},
         {"seed", seed},
         {"overrides", json::array()},
         {"seed_sources", json::array()},
         {"section_keys", json::object()}};
  for (const auto& [where, kind] : overrides) {
    j["overrides"].push_back({{"section", where.first}, {"slot", where.second}, {"kind", std::string(to_string(kind))}});
  }
  for (const auto& [section, phrase] : seed_sources) j["seed_sources"].push_back({{"section", section}, {"phrase", phrase}});
  for (const auto& [label, key] : section_keys) j["section_keys"][label] = key_name(key);
  return j;
}

GenerationPlan GenerationPlan::from_json(const json& j) {
  GenerationPlan p;
  try {
    if (j.contains("form")) {
      const auto& f = j.at("form");
      if (f.is_string()) {
        p.form = parse_form(f.get<std::string>());
      } else {
        p.form.clear();
        for (const auto& s : f) p.form.push_back(SectionSpec{s.at("label").get<std::string>(), s.at("phrases").get<int>()});
      }
    }
    if (j.contains("gr_ratio")) {
      const auto& r = j.at("gr_ratio");
      p.gr_ratio = r.is_string() ? parse_gr_ratio(r.get<std::string>()) : GrRatio{r.at(0).get<int>(), r.at(1).get<int>()};
    }
    p.temperatures = j.value("temperatures", p.temperatures);
    if (j.contains("pool_size") && !j.contains("temperatures")) {
      // K evenly spaced temperatures over the default span.
      const int k = j.at("pool_size").get<int>();
      if (k < 1) throw DataError("pool size K must be at least 1");
      p.temperatures.clear();
      for (int i = 0; i < k; ++i) p.temperatures.push_back(k == 1 ? 1.0 : 0.7 + 0.6 * i / (k - 1));
    }
    if (j.contains("new_section_motif_length")) {
      const auto& r = j.at("new_section_motif_length");
      p.new_section_motif_length = {r.at(0).get<int>(), r.at(1).get<int>()};
    }
    p.refiner_context_bars = j.value("refiner_context_bars", p.refiner_context_bars);
    p.use_selector = j.value("use_selector", p.use_selector);
    p.max_new_tokens = j.value("max_new_tokens", p.max_new_tokens);
    p.seed = j.value("seed", p.seed);
    for (const auto& o : j.value("overrides", json::array())) {
      p.overrides[{o.at("section").get<std::size_t>(), o.at("slot").get<int>()}] =
          parse_transformation_kind(o.at("kind").get<std::string>());
    }
    for (const auto& o : j.value("seed_sources", json::array())) {
      p.seed_sources[o.at("section").get<std::size_t>()] = o.at("phrase").get<std::size_t>();
    }
    const json keys = j.value("section_keys", json::object());
    for (const auto& [label, key] : keys.items()) {
      p.section_keys[label] = parse_key(key.get<std::string>());
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("generation plan: ") + e.what());
  }
  p.validate();
  return p;
}

json ProvenanceRecord::to_json() const {
  json j{{"phrase_index", phrase_index},
         {"section", section},
         {"source", std::string(slot_name(source))},
         {"transformation", nullptr},
         {"corruption", nullptr},
         {"parent", nullptr},
         {"temperature", nullptr},
         {"selector_score", nullptr},
         {"octave_shift", octave_shift}};
  if (transformation) j["transformation"] = std::string(to_string(*transformation));
  if (corruption) j["corruption"] = std::string(to_string(*corruption));
  if (parent) j["parent"] = *parent;
  if (temperature) j["temperature"] = *temperature;
  if (selector_score) j["selector_score"] = *selector_score;
  return j;
}

ProvenanceRecord ProvenanceRecord::from_json(const json& j) {
  ProvenanceRecord r;
  r.phrase_index = j.at("phrase_index").get<std::size_t>();
  r.section = j.at("section").get<std::string>();
  r.source = parse_slot(j.at("source").get<std::string>());
  if (!j.value("transformation", json()).is_null()) {
    r.transformation = parse_transformation_kind(j.at("transformation").get<std::string>());
  }
  if (!j.value("corruption", json()).is_null()) r.corruption = parse_corruption_tag(j.at("corruption").get<std::string>());
  if (!j.value("parent", json()).is_null()) r.parent = j.at("parent").get<std::size_t>();
  if (!j.value("temperature", json()).is_null()) r.temperature = j.at("temperature").get<double>();
  if (!j.value("selector_score", json()).is_null()) r.selector_score = j.at("selector_score").get<double>();
  r.octave_shift = j.value("octave_shift", 0);
  return r;
}

json GeneratedPiece::to_json() const {
  json j{{"format", "yinyang-piece"}, {"version", 1}, {"song", yinyang::to_json(song)}, {"plan", plan.to_json()}};
  j["provenance"] = json::array();
  for (const auto& r : provenance) j["provenance"].push_back(r.to_json());
  j["diagnostics"] = diagnostics;
  return j;
}

GeneratedPiece GeneratedPiece::from_json(const json& j) {
  if (j.value("format", "") != "yinyang-piece") throw DataError("not a generated piece document");
  GeneratedPiece p;
  p.song = song_from_json(j.at("song"));
  p.plan = GenerationPlan::from_json(j.at("plan"));
  for (const auto& r : j.at("provenance")) p.provenance.push_back(ProvenanceRecord::from_json(r));
  p.diagnostics = j.value("diagnostics", std::vector<std::string>{});
  return p;
}

std::string provenance_report(const GeneratedPiece& piece) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-5s %-8s %-13s %-26s %-24s %s\n", "idx", "section", "source", "transformation",
                "corruption", "parent");
  out << line;
  for (const auto& r : piece.provenance) {
    const std::string kind = r.transformation ? std::string(to_string(*r.transformation)) : "-";
    const std::string tag = r.corruption ? std::string(to_string(*r.corruption)) : "-";
    const std::string parent = r.parent ? std::to_string(*r.parent) : "-";
    std::snprintf(line, sizeof line, "%-5zu %-8s %-13s %-26s %-24s %s\n", r.phrase_index, r.section.c_str(),
                  std::string(slot_name(r.source)).c_str(), kind.c_str(), tag.c_str(), parent.c_str());
    out << line;
  }
  return out.str();
}

void write_piece(const GeneratedPiece& piece, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  write_json_file(directory / "piece.json", piece.to_json());
  if (!piece.song.phrases.empty()) export_midi(piece.song, directory / "piece.mid");
  std::ofstream report(directory / "provenance.txt");
  if (!report) throw DataError("cannot write " + (directory / "provenance.txt").string());
  report << provenance_report(piece);
  for (const auto& d : piece.diagnostics) report << "# " << d << '\n';
}

}  // namespace yinyang
