#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rlsf/core/record_format.hpp"
#include "rlsf/cost_model/classifier.hpp"

namespace rlsf::feedback {

/// One trajectory shown to the evaluator, cut into labelable segments.
struct FeedbackQuery {
  std::uint64_t query_id = 0;
  std::int64_t round = 0;
  /// Full trajectory, segment bounds and render poses; labels unset.
  TrajectoryRecord record;
  /// Per-step ground-truth costs for the scripted evaluator. Never served to humans.
  std::vector<int> gt_costs;
};

struct FeedbackAnswer {
  std::uint64_t query_id = 0;
  /// One entry per segment, 1 = safe, 0 = unsafe.
  std::vector<int> labels;

  friend bool operator==(const FeedbackAnswer&, const FeedbackAnswer&) = default;
};

FeedbackQuery make_query(std::uint64_t query_id, std::int64_t round, std::uint64_t trajectory_id,
                         const Trajectory& traj, std::int64_t k, std::vector<int> gt_costs,
                         std::vector<std::vector<double>> poses = {});

/// 0 iff any step of the segment has ground-truth cost 1.
int scripted_label(std::span<const int> costs);

FeedbackAnswer scripted_answer(const FeedbackQuery& query);

/// Throws ValidationError unless `answer` carries exactly one 0/1 label per segment.
void check_answer(const TrajectoryRecord& record, const FeedbackAnswer& answer);

/// "1 0 1" or "labels\t1 0 1"; throws ValidationError on anything else.
std::vector<int> parse_label_line(std::string_view text);
std::string format_label_line(std::span<const int> labels);

struct ExampleProvenance {
  std::uint64_t query_id = 0;
  std::size_t segment_index = 0;
  std::int64_t round = 0;

  friend bool operator==(const ExampleProvenance&, const ExampleProvenance&) = default;
};

/// Append-only store of state-level examples inherited from segment labels,
/// with the query/answer log it was built from.
///
/// Log layout: each query is a full trajectory record (query line, unlabeled
/// segments), each answer a line `answer<TAB>query_id<TAB>labels`.
class FeedbackBuffer {
 public:
  FeedbackBuffer() = default;

  /// Registers a query and appends it to the log. Throws StateError on a reused id.
  void add_query(const FeedbackQuery& query);
  /// Merges an answer: every state of segment i gets label i. Throws StateError
  /// for unknown or already answered ids and ValidationError for malformed labels.
  void add_answer(const FeedbackAnswer& answer);

  bool has_query(std::uint64_t query_id) const { return queries_.count(query_id) > 0; }
  bool answered(std::uint64_t query_id) const { return answers_.count(query_id) > 0; }
  std::vector<std::uint64_t> pending() const;

  const std::vector<cost::LabeledExample>& examples() const { return examples_; }
  const std::vector<ExampleProvenance>& provenance() const { return provenance_; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  std::size_t n_queries() const { return queries_.size(); }
  std::size_t n_answers() const { return answers_.size(); }

  const std::string& log_text() const { return log_; }
  const TrajectoryRecord& query_record(std::uint64_t query_id) const;
  std::optional<FeedbackAnswer> answer(std::uint64_t query_id) const;

  /// Mirror every future log append to `path` (opened in append mode).
  void attach_log_file(std::filesystem::path path);

  /// Replays a persisted log.
  static FeedbackBuffer rebuild(std::string_view log_text);
  static FeedbackBuffer rebuild_from_file(const std::filesystem::path& path);

  friend bool operator==(const FeedbackBuffer& a, const FeedbackBuffer& b) {
    return a.log_ == b.log_ && a.examples_.size() == b.examples_.size() && a.provenance_ == b.provenance_;
  }

 private:
  void append_log(const std::string& chunk);

  std::map<std::uint64_t, TrajectoryRecord> queries_;
  std::map<std::uint64_t, FeedbackAnswer> answers_;
  std::vector<cost::LabeledExample> examples_;
  std::vector<ExampleProvenance> provenance_;
  std::string log_;
  std::optional<std::filesystem::path> log_file_;
};

}  // namespace rlsf::feedback
