#include "rlsf/feedback/feedback.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "rlsf/core/errors.hpp"

namespace rlsf::feedback {

FeedbackQuery make_query(std::uint64_t query_id, std::int64_t round, std::uint64_t trajectory_id,
                         const Trajectory& traj, std::int64_t k, std::vector<int> gt_costs,
                         std::vector<std::vector<double>> poses) {
  if (!gt_costs.empty() && gt_costs.size() != traj.size()) {
    throw ValidationError("ground-truth costs must have one entry per step");
  }
  FeedbackQuery q;
  q.query_id = query_id;
  q.round = round;
  q.record.trajectory_id = trajectory_id;
  q.record.trajectory = traj;
  q.record.query_id = query_id;
  q.record.round = round;
  q.record.poses = std::move(poses);
  q.record.segments = split_into_segments(traj, k, trajectory_id);
  q.record.labels.assign(q.record.segments.size(), std::nullopt);
  q.gt_costs = std::move(gt_costs);
  return q;
}

int scripted_label(std::span<const int> costs) {
  for (int c : costs) {
    if (c != 0 && c != 1) throw ValidationError("ground-truth costs must be 0 or 1");
    if (c == 1) return 0;
  }
  return 1;
}

FeedbackAnswer scripted_answer(const FeedbackQuery& query) {
  if (query.gt_costs.size() != query.record.trajectory.size()) {
    throw ValidationError("scripted evaluator needs per-step ground-truth costs");
  }
  FeedbackAnswer a{query.query_id, {}};
  for (const auto& seg : query.record.segments) {
    a.labels.push_back(scripted_label(std::span<const int>(query.gt_costs)
                                          .subspan(static_cast<std::size_t>(seg.start),
                                                   static_cast<std::size_t>(seg.length()))));
  }
  return a;
}

void check_answer(const TrajectoryRecord& record, const FeedbackAnswer& answer) {
  if (answer.labels.size() != record.segments.size()) {
    throw ValidationError("query " + std::to_string(answer.query_id) + " has " +
                          std::to_string(record.segments.size()) + " segments but " +
                          std::to_string(answer.labels.size()) + " labels were given");
  }
  for (int y : answer.labels) {
    if (y != 0 && y != 1) throw ValidationError("labels must be 0 (unsafe) or 1 (safe)");
  }
}

std::vector<int> parse_label_line(std::string_view text) {
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.remove_suffix(1);
  auto fields = split_fields(text);
  std::string_view body;
  if (fields.size() == 2 && fields[0] == "labels") {
    body = fields[1];
  } else if (fields.size() == 1) {
    body = fields[0];
  } else {
    throw ValidationError("label body must be 'labels<TAB>l1 l2 ...' or 'l1 l2 ...'");
  }
  std::vector<int> labels;
  for (auto tok : split_fields(body, ' ')) {
    if (tok.empty()) continue;
    if (tok == "1") {
      labels.push_back(1);
    } else if (tok == "0") {
      labels.push_back(0);
    } else {
      throw ValidationError("invalid label '" + std::string(tok) + "'; every segment needs 0 or 1");
    }
  }
  return labels;
}

std::string format_label_line(std::span<const int> labels) {
  std::string s;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(labels[i]);
  }
  return s;
}

void FeedbackBuffer::add_query(const FeedbackQuery& query) {
  if (queries_.count(query.query_id)) {
    throw StateError("query id " + std::to_string(query.query_id) + " already registered");
  }
  TrajectoryRecord rec = query.record;
  rec.query_id = query.query_id;
  rec.round = query.round;
  rec.labels.assign(rec.segments.size(), std::nullopt);
  append_log(to_record_string(rec));
  queries_.emplace(query.query_id, std::move(rec));
}

void FeedbackBuffer::add_answer(const FeedbackAnswer& answer) {
  const auto it = queries_.find(answer.query_id);
  if (it == queries_.end()) throw StateError("answer for unknown query " + std::to_string(answer.query_id));
  if (answers_.count(answer.query_id)) {
    throw StateError("query " + std::to_string(answer.query_id) + " already answered; first answer wins");
  }
  const TrajectoryRecord& rec = it->second;
  check_answer(rec, answer);
  for (std::size_t i = 0; i < rec.segments.size(); ++i) {
    const auto& seg = rec.segments[i];
    for (auto t = seg.start; t <= seg.end; ++t) {
      const auto& tr = rec.trajectory.transitions[static_cast<std::size_t>(t)];
      examples_.push_back({tr.state, tr.action, answer.labels[i]});
      provenance_.push_back({answer.query_id, i, rec.round});
    }
  }
  answers_.emplace(answer.query_id, answer);
  append_log("answer\t" + std::to_string(answer.query_id) + "\t" + format_label_line(answer.labels) + "\n");
}

std::vector<std::uint64_t> FeedbackBuffer::pending() const {
  std::vector<std::uint64_t> out;
  for (const auto& [id, rec] : queries_) {
    if (!answers_.count(id)) out.push_back(id);
  }
  return out;
}

const TrajectoryRecord& FeedbackBuffer::query_record(std::uint64_t query_id) const {
  const auto it = queries_.find(query_id);
  if (it == queries_.end()) throw ValidationError("unknown query " + std::to_string(query_id));
  return it->second;
}

std::optional<FeedbackAnswer> FeedbackBuffer::answer(std::uint64_t query_id) const {
  const auto it = answers_.find(query_id);
  if (it == answers_.end()) return std::nullopt;
  return it->second;
}

void FeedbackBuffer::attach_log_file(std::filesystem::path path) { log_file_ = std::move(path); }

void FeedbackBuffer::append_log(const std::string& chunk) {
  log_ += chunk;
  if (log_file_) {
    std::ofstream out(*log_file_, std::ios::app | std::ios::binary);
    if (!out) throw std::runtime_error("cannot append to feedback log " + log_file_->string());
    out << chunk;
  }
}

FeedbackBuffer FeedbackBuffer::rebuild(std::string_view log_text) {
  FeedbackBuffer buf;
  std::size_t pos = 0;
  std::size_t record_start = std::string_view::npos;
  while (pos < log_text.size()) {
    auto nl = log_text.find('\n', pos);
    if (nl == std::string_view::npos) nl = log_text.size();
    const auto line = log_text.substr(pos, nl - pos);
    const auto next = std::min(nl + 1, log_text.size());
    if (record_start != std::string_view::npos) {
      if (line == "end") {
        const auto rec = parse_record(log_text.substr(record_start, next - record_start));
        if (!rec.query_id) throw ValidationError("feedback log record without a query line");
        FeedbackQuery q;
        q.query_id = *rec.query_id;
        q.round = rec.round;
        q.record = rec;
        try {
          buf.add_query(q);
        } catch (const StateError& e) {
          throw ValidationError(std::string("corrupt feedback log: ") + e.what());
        }
        record_start = std::string_view::npos;
      }
    } else if (line.rfind("rlsf-record", 0) == 0) {
      record_start = pos;
    } else if (line.rfind("answer\t", 0) == 0) {
      const auto fields = split_fields(line);
      if (fields.size() != 3) throw ValidationError("malformed answer line in feedback log");
      FeedbackAnswer a;
      const auto id = fields[1];
      if (std::from_chars(id.data(), id.data() + id.size(), a.query_id).ec != std::errc{})
        throw ValidationError("malformed query id in feedback log");
      a.labels = parse_label_line(fields[2]);
      try {
        buf.add_answer(a);
      } catch (const StateError& e) {
        throw ValidationError(std::string("corrupt feedback log: ") + e.what());
      }
    } else if (!line.empty()) {
      throw ValidationError("unexpected line in feedback log: " + std::string(line.substr(0, 40)));
    }
    pos = nl + 1;
  }
  if (record_start != std::string_view::npos) throw ValidationError("feedback log ends inside a record");
  return buf;
}

FeedbackBuffer FeedbackBuffer::rebuild_from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open feedback log " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return rebuild(ss.str());
}

}  // namespace rlsf::feedback
