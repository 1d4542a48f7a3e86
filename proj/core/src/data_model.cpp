#include "classnet/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "classnet/csv.hpp"
#include "classnet/error.hpp"

namespace classnet {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kNumLabels> kLabelNames = {
    "ExplainOwnIdea", "EngageLow", "EngageMedium", "EngageHigh", "Uncorrelated"};

const std::vector<std::string> kTranscriptHeader = {
    "utterance_id", "lesson_id", "block_id", "turn_index", "speaker_id", "text", "addressee_id"};

const std::vector<std::string> kRosterHeader = {"student_id", "name", "gender", "pre_score",
                                                "post_score"};

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

long parse_turn(const std::string& s, std::size_t line) {
  std::string t = trim(s);
  if (t.empty()) throw ParseError(at_line(line) + "missing turn_index");
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(t, &pos);
  } catch (const std::exception&) {
    throw ParseError(at_line(line) + "turn_index '" + t + "' is not an integer");
  }
  if (pos != t.size() || v < 0) {
    throw ParseError(at_line(line) + "turn_index '" + t + "' must be a non-negative integer");
  }
  return v;
}

std::optional<double> parse_score(const std::string& s, std::size_t line, const char* what) {
  std::string t = trim(s);
  if (t.empty() || t == "NA" || t == "na" || t == "NaN") return std::nullopt;
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(t, &pos);
  } catch (const std::exception&) {
    throw ParseError(at_line(line) + what + " '" + t + "' is not a number");
  }
  if (pos != t.size() || !std::isfinite(v)) {
    throw ParseError(at_line(line) + what + " '" + t + "' is not a number");
  }
  return v;
}

void finalize(std::vector<Utterance>& out) {
  std::set<std::string> ids;
  for (const auto& u : out) {
    if (!ids.insert(u.utterance_id).second) {
      throw IntegrityError("duplicate utterance_id '" + u.utterance_id + "'");
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Utterance& a, const Utterance& b) {
    return std::tie(a.lesson_id, a.block_id, a.turn_index) <
           std::tie(b.lesson_id, b.block_id, b.turn_index);
  });
  for (std::size_t i = 1; i < out.size(); ++i) {
    const auto& a = out[i - 1];
    const auto& b = out[i];
    if (a.lesson_id == b.lesson_id && a.block_id == b.block_id && a.turn_index == b.turn_index) {
      throw IntegrityError("turn_index " + std::to_string(b.turn_index) + " repeated in lesson '" +
                           b.lesson_id + "' block '" + b.block_id + "'");
    }
  }
}

bool has_extension(const std::filesystem::path& p, std::initializer_list<const char*> exts) {
  auto e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return std::any_of(exts.begin(), exts.end(), [&](const char* x) { return e == x; });
}

}  // namespace

std::string_view to_string(FineLabel label) { return kLabelNames[static_cast<std::size_t>(label)]; }

std::optional<FineLabel> try_parse_label(std::string_view text) {
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (kLabelNames[i] == text) return static_cast<FineLabel>(i);
  }
  return std::nullopt;
}

FineLabel parse_label(std::string_view text) {
  if (auto l = try_parse_label(text)) return *l;
  throw ParseError("unknown label '" + std::string(text) + "'");
}

std::optional<int> Student::proficiency() const {
  if (!pre_score) return std::nullopt;
  return *pre_score >= kProficiencyThreshold ? 1 : 0;
}

Roster::Roster(std::vector<Student> students, std::string gender_coding)
    : students_(std::move(students)), gender_coding_(std::move(gender_coding)) {
  for (std::size_t i = 0; i < students_.size(); ++i) {
    if (!index_.emplace(students_[i].student_id, i).second) {
      throw IntegrityError("duplicate student_id '" + students_[i].student_id + "'");
    }
  }
}

std::optional<std::size_t> Roster::index_of(std::string_view student_id) const {
  auto it = index_.find(std::string(student_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Roster::require_index(std::string_view student_id) const {
  if (auto i = index_of(student_id)) return *i;
  throw IntegrityError("student '" + std::string(student_id) + "' is not in the roster");
}

std::vector<Utterance> parse_transcripts_csv(std::string_view text) {
  auto records = csv::parse(text);
  if (records.empty()) throw ParseError("transcript file is empty");
  const auto& header = records.front();
  std::vector<std::string> names;
  for (const auto& f : header.fields) names.push_back(trim(f));
  std::vector<int> col(kTranscriptHeader.size(), -1);
  for (std::size_t k = 0; k < kTranscriptHeader.size(); ++k) {
    auto it = std::find(names.begin(), names.end(), kTranscriptHeader[k]);
    if (it != names.end()) col[k] = static_cast<int>(it - names.begin());
    else if (kTranscriptHeader[k] != "addressee_id") {
      throw ParseError(at_line(header.line) + "missing column '" + kTranscriptHeader[k] + "'");
    }
  }

  std::vector<Utterance> out;
  out.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != names.size()) {
      throw ParseError(at_line(rec.line) + "expected " + std::to_string(names.size()) +
                       " fields, found " + std::to_string(rec.fields.size()));
    }
    auto get = [&](std::size_t k) -> const std::string& { return rec.fields[col[k]]; };
    Utterance u;
    u.utterance_id = trim(get(0));
    u.lesson_id = trim(get(1));
    u.block_id = trim(get(2));
    u.turn_index = parse_turn(get(3), rec.line);
    u.speaker_id = trim(get(4));
    u.text = get(5);
    if (col[6] >= 0) {
      auto a = trim(get(6));
      if (!a.empty()) u.addressee_id = a;
    }
    if (u.utterance_id.empty()) throw ParseError(at_line(rec.line) + "missing utterance_id");
    if (u.speaker_id.empty()) throw ParseError(at_line(rec.line) + "missing speaker_id");
    out.push_back(std::move(u));
  }
  finalize(out);
  return out;
}

std::vector<Utterance> parse_transcripts_jsonl(std::string_view text) {
  std::vector<Utterance> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      json j = json::parse(line);
      Utterance u;
      u.utterance_id = j.at("utterance_id").get<std::string>();
      u.lesson_id = j.at("lesson_id").get<std::string>();
      u.block_id = j.at("block_id").get<std::string>();
      const auto& t = j.at("turn_index");
      if (!t.is_number_integer() || t.get<long>() < 0) {
        throw ParseError("turn_index must be a non-negative integer");
      }
      u.turn_index = t.get<long>();
      u.speaker_id = j.at("speaker_id").get<std::string>();
      u.text = j.at("text").get<std::string>();
      if (j.contains("addressee_id") && !j["addressee_id"].is_null()) {
        auto a = j["addressee_id"].get<std::string>();
        if (!a.empty()) u.addressee_id = a;
      }
      out.push_back(std::move(u));
    } catch (const ParseError& e) {
      throw ParseError(at_line(lineno) + e.what());
    } catch (const json::exception& e) {
      throw ParseError(at_line(lineno) + e.what());
    }
  }
  finalize(out);
  return out;
}

std::vector<Utterance> load_transcripts(const std::filesystem::path& path) {
  auto text = read_file(path);
  try {
    if (has_extension(path, {".jsonl", ".json", ".ndjson"})) return parse_transcripts_jsonl(text);
    return parse_transcripts_csv(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_transcripts(const std::filesystem::path& path, const std::vector<Utterance>& utterances) {
  std::ostringstream out;
  if (has_extension(path, {".jsonl", ".json", ".ndjson"})) {
    for (const auto& u : utterances) {
      json j = {{"utterance_id", u.utterance_id}, {"lesson_id", u.lesson_id},
                {"block_id", u.block_id},         {"turn_index", u.turn_index},
                {"speaker_id", u.speaker_id},     {"text", u.text}};
      j["addressee_id"] = u.addressee_id ? json(*u.addressee_id) : json(nullptr);
      out << j.dump() << '\n';
    }
  } else {
    csv::write_row(out, kTranscriptHeader);
    for (const auto& u : utterances) {
      csv::write_row(out, {u.utterance_id, u.lesson_id, u.block_id, std::to_string(u.turn_index),
                           u.speaker_id, u.text, u.addressee_id.value_or("")});
    }
  }
  write_file(path, out.str());
}

void check_speakers(const std::vector<Utterance>& utterances, const Roster& roster) {
  for (const auto& u : utterances) {
    if (!roster.contains(u.speaker_id)) {
      throw IntegrityError("utterance '" + u.utterance_id + "': speaker '" + u.speaker_id +
                           "' is not in the roster");
    }
    if (u.addressee_id && !roster.contains(*u.addressee_id)) {
      throw IntegrityError("utterance '" + u.utterance_id + "': addressee '" + *u.addressee_id +
                           "' is not in the roster");
    }
  }
}

Roster parse_roster_csv(std::string_view text) {
  std::vector<std::string> comments;
  auto records = csv::parse(text, &comments);
  std::string coding;
  for (const auto& c : comments) {
    auto body = trim(std::string_view(c).substr(1));
    const std::string key = "gender:";
    if (body.rfind(key, 0) == 0) coding = trim(std::string_view(body).substr(key.size()));
  }
  if (records.empty()) throw ParseError("roster file is empty");
  const auto& header = records.front();
  std::vector<std::string> names;
  for (const auto& f : header.fields) names.push_back(trim(f));
  std::vector<int> col(kRosterHeader.size(), -1);
  for (std::size_t k = 0; k < kRosterHeader.size(); ++k) {
    auto it = std::find(names.begin(), names.end(), kRosterHeader[k]);
    if (it == names.end()) {
      throw ParseError(at_line(header.line) + "missing column '" + kRosterHeader[k] + "'");
    }
    col[k] = static_cast<int>(it - names.begin());
  }
  std::vector<Student> students;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != names.size()) {
      throw ParseError(at_line(rec.line) + "expected " + std::to_string(names.size()) +
                       " fields, found " + std::to_string(rec.fields.size()));
    }
    Student s;
    s.student_id = trim(rec.fields[col[0]]);
    s.display_name = trim(rec.fields[col[1]]);
    auto g = trim(rec.fields[col[2]]);
    if (g == "0") s.gender = 0;
    else if (g == "1") s.gender = 1;
    else throw ParseError(at_line(rec.line) + "gender code '" + g + "' is not 0 or 1");
    s.pre_score = parse_score(rec.fields[col[3]], rec.line, "pre_score");
    s.post_score = parse_score(rec.fields[col[4]], rec.line, "post_score");
    if (s.post_score && (*s.post_score < 0.0 || *s.post_score > 24.0)) {
      throw ParseError(at_line(rec.line) + "post_score outside [0, 24]");
    }
    if (s.student_id.empty()) throw ParseError(at_line(rec.line) + "missing student_id");
    students.push_back(std::move(s));
  }
  return Roster(std::move(students), coding);
}

Roster load_roster(const std::filesystem::path& path) {
  try {
    return parse_roster_csv(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

namespace {
std::string format_score(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s.precision(17);
  s << *v;
  return s.str();
}
}  // namespace

void write_roster(const std::filesystem::path& path, const Roster& roster) {
  std::ostringstream out;
  if (!roster.gender_coding().empty()) out << "# gender: " << roster.gender_coding() << '\n';
  csv::write_row(out, kRosterHeader);
  for (const auto& s : roster.students()) {
    csv::write_row(out, {s.student_id, s.display_name, std::to_string(s.gender),
                         format_score(s.pre_score), format_score(s.post_score)});
  }
  write_file(path, out.str());
}

std::vector<LabeledUtterance> load_labels(const std::filesystem::path& path) {
  std::vector<LabeledUtterance> out;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      json j = json::parse(line);
      LabeledUtterance l;
      l.utterance_id = j.at("utterance_id").get<std::string>();
      l.label = parse_label(j.at("label").get<std::string>());
      l.source = j.at("source").get<std::string>();
      auto opt = [&](const char* k) -> std::optional<std::string> {
        if (j.contains(k) && !j[k].is_null()) return j[k].get<std::string>();
        return std::nullopt;
      };
      l.reasoning = opt("reasoning");
      l.annotator_id = opt("annotator_id");
      l.timestamp = opt("timestamp");
      if (l.source == kSourceHuman && !l.annotator_id) {
        throw IntegrityError("HUMAN label without annotator_id");
      }
      out.push_back(std::move(l));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": " + at_line(lineno) + e.what());
    } catch (const Error& e) {
      throw ParseError(path.string() + ": " + at_line(lineno) + e.what());
    }
  }
  return out;
}

void write_labels(const std::filesystem::path& path, const std::vector<LabeledUtterance>& labels) {
  std::ostringstream out;
  for (const auto& l : labels) {
    json j = {{"utterance_id", l.utterance_id},
              {"label", std::string(to_string(l.label))},
              {"source", l.source}};
    if (l.reasoning) j["reasoning"] = *l.reasoning;
    if (l.annotator_id) j["annotator_id"] = *l.annotator_id;
    if (l.timestamp) j["timestamp"] = *l.timestamp;
    out << j.dump() << '\n';
  }
  write_file(path, out.str());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace classnet
