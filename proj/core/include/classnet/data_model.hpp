#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace classnet {

enum class FineLabel {
  ExplainOwnIdea = 0,
  EngageLow = 1,
  EngageMedium = 2,
  EngageHigh = 3,
  Uncorrelated = 4,
};

inline constexpr std::size_t kNumLabels = 5;
inline constexpr std::array<FineLabel, kNumLabels> kAllLabels = {
    FineLabel::ExplainOwnIdea, FineLabel::EngageLow, FineLabel::EngageMedium,
    FineLabel::EngageHigh, FineLabel::Uncorrelated};

std::string_view to_string(FineLabel label);
// Accepts the canonical names only ("EngageMedium"); throws ParseError.
FineLabel parse_label(std::string_view text);
std::optional<FineLabel> try_parse_label(std::string_view text);

constexpr bool is_engage(FineLabel l) {
  return l == FineLabel::EngageLow || l == FineLabel::EngageMedium ||
         l == FineLabel::EngageHigh;
}

struct Utterance {
  std::string utterance_id;
  std::string lesson_id;
  std::string block_id;
  long turn_index = 0;
  std::string speaker_id;
  std::string text;
  std::optional<std::string> addressee_id;

  bool operator==(const Utterance&) const = default;
};

inline constexpr std::string_view kSourceHuman = "HUMAN";
inline constexpr std::string_view kSourceEnsemble = "ENSEMBLE";

struct LabeledUtterance {
  std::string utterance_id;
  FineLabel label = FineLabel::Uncorrelated;
  std::string source;  // model id, "HUMAN" or "ENSEMBLE"
  std::optional<std::string> reasoning;
  std::optional<std::string> annotator_id;
  std::optional<std::string> timestamp;

  bool operator==(const LabeledUtterance&) const = default;
};

// Scores at or above this CST value count as proficient.
inline constexpr double kProficiencyThreshold = 350.0;

struct Student {
  std::string student_id;
  std::string display_name;
  int gender = 0;  // binary code; meaning declared by Roster::gender_coding
  std::optional<double> pre_score;
  std::optional<double> post_score;

  // 1 iff pre_score >= 350; absent when pre_score is absent.
  std::optional<int> proficiency() const;

  bool operator==(const Student&) const = default;
};

class Roster {
 public:
  Roster() = default;
  explicit Roster(std::vector<Student> students, std::string gender_coding = {});

  std::size_t size() const { return students_.size(); }
  const std::vector<Student>& students() const { return students_; }
  const Student& operator[](std::size_t i) const { return students_[i]; }

  std::optional<std::size_t> index_of(std::string_view student_id) const;
  // Throws IntegrityError for unknown ids.
  std::size_t require_index(std::string_view student_id) const;
  bool contains(std::string_view student_id) const { return index_of(student_id).has_value(); }

  // Free-form declaration such as "0=male,1=female"; empty when undeclared.
  const std::string& gender_coding() const { return gender_coding_; }

  bool operator==(const Roster& o) const {
    return students_ == o.students_ && gender_coding_ == o.gender_coding_;
  }

 private:
  std::vector<Student> students_;
  std::unordered_map<std::string, std::size_t> index_;
  std::string gender_coding_;
};

// Transcripts: CSV with header
//   utterance_id,lesson_id,block_id,turn_index,speaker_id,text,addressee_id
// or JSON-lines with the same field names (chosen by the .jsonl/.json
// extension). Result is sorted by (lesson_id, block_id, turn_index).
std::vector<Utterance> load_transcripts(const std::filesystem::path& path);
std::vector<Utterance> parse_transcripts_csv(std::string_view text);
std::vector<Utterance> parse_transcripts_jsonl(std::string_view text);
void write_transcripts(const std::filesystem::path& path, const std::vector<Utterance>& utterances);

// Ensures speaker/addressee ids are present in the roster.
void check_speakers(const std::vector<Utterance>& utterances, const Roster& roster);

// Roster CSV: student_id,name,gender,pre_score,post_score. A leading
// comment line "# gender: <coding>" declares the gender code mapping.
Roster load_roster(const std::filesystem::path& path);
Roster parse_roster_csv(std::string_view text);
void write_roster(const std::filesystem::path& path, const Roster& roster);

// JSON-lines of LabeledUtterance.
std::vector<LabeledUtterance> load_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<LabeledUtterance>& labels);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace classnet
