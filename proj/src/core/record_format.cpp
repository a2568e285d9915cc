#include "rlsf/core/record_format.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <sstream>
#include <string>

#include "rlsf/core/errors.hpp"

namespace rlsf {
namespace {

constexpr std::string_view kMagic = "rlsf-record";
constexpr std::string_view kVersion = "1";

template <typename Int>
Int parse_int(std::string_view s) {
  Int value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ValidationError("malformed integer field '" + std::string(s) + "'");
  }
  return value;
}

void require_fields(const std::vector<std::string_view>& f, std::size_t n, std::string_view kind) {
  if (f.size() != n) {
    throw ValidationError("record line '" + std::string(kind) + "' expects " + std::to_string(n) + " fields, got " +
                          std::to_string(f.size()));
  }
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t stop = nl == std::string_view::npos ? text.size() : nl;
    std::string_view line = text.substr(pos, stop - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    pos = stop + 1;
  }
  return lines;
}

// Parses records starting at lines[i]; advances i past the "end" line.
TrajectoryRecord parse_one(const std::vector<std::string_view>& lines, std::size_t& i) {
  if (i >= lines.size()) throw ValidationError("unexpected end of record stream");
  auto header = split_fields(lines[i]);
  if (header.size() != 2 || header[0] != kMagic) throw ValidationError("missing rlsf-record header");
  if (header[1] != kVersion) throw ValidationError("unsupported record version " + std::string(header[1]));
  ++i;

  TrajectoryRecord rec;
  bool have_trajectory = false;
  std::int64_t declared_length = -1;
  for (; i < lines.size(); ++i) {
    const auto f = split_fields(lines[i]);
    const std::string_view kind = f[0];
    if (kind == "end") {
      ++i;
      if (!have_trajectory) throw ValidationError("record without trajectory line");
      if (static_cast<std::int64_t>(rec.trajectory.size()) != declared_length) {
        throw ValidationError("record step count does not match declared length");
      }
      if (!rec.poses.empty() && rec.poses.size() != rec.trajectory.size()) {
        throw ValidationError("pose lines must cover every step");
      }
      rec.trajectory.validate();
      return rec;
    }
    if (kind == "trajectory") {
      require_fields(f, 5, kind);
      rec.trajectory_id = parse_int<std::uint64_t>(f[1]);
      rec.trajectory.env_seed = parse_int<std::uint64_t>(f[2]);
      rec.trajectory.policy_version = parse_int<std::int64_t>(f[3]);
      declared_length = parse_int<std::int64_t>(f[4]);
      have_trajectory = true;
    } else if (kind == "query") {
      require_fields(f, 3, kind);
      rec.query_id = parse_int<std::uint64_t>(f[1]);
      rec.round = parse_int<std::int64_t>(f[2]);
    } else if (kind == "step") {
      require_fields(f, 6, kind);
      Transition tr;
      tr.t = parse_int<std::int64_t>(f[1]);
      tr.state = StateVec(parse_reals(f[2]));
      tr.action = ActionVec(parse_reals(f[3]));
      tr.reward = parse_real(f[4]);
      const auto done = parse_int<int>(f[5]);
      if (done != 0 && done != 1) throw ValidationError("done flag must be 0 or 1");
      tr.done = done == 1;
      rec.trajectory.transitions.push_back(std::move(tr));
    } else if (kind == "pose") {
      require_fields(f, 3, kind);
      const auto t = parse_int<std::int64_t>(f[1]);
      if (t != static_cast<std::int64_t>(rec.poses.size())) throw ValidationError("pose lines out of order");
      rec.poses.push_back(parse_reals(f[2]));
    } else if (kind == "segment") {
      require_fields(f, 5, kind);
      const auto index = parse_int<std::size_t>(f[1]);
      if (index != rec.segments.size()) throw ValidationError("segment lines out of order");
      Segment seg{rec.trajectory_id, parse_int<std::int64_t>(f[2]), parse_int<std::int64_t>(f[3])};
      rec.segments.push_back(seg);
      if (f[4] == "-") {
        rec.labels.emplace_back(std::nullopt);
      } else {
        const auto y = parse_int<int>(f[4]);
        if (y != 0 && y != 1) throw ValidationError("segment label must be 0, 1 or -");
        rec.labels.emplace_back(y);
      }
    } else {
      throw ValidationError("unknown record line kind '" + std::string(kind) + "'");
    }
  }
  throw ValidationError("record not terminated by 'end'");
}

}  // namespace

std::string format_real(double v) {
  if (!std::isfinite(v)) throw ValidationError("cannot serialize non-finite value");
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw ValidationError("real formatting failed");
  return std::string(buf, ptr);
}

double parse_real(std::string_view s) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ValidationError("malformed real field '" + std::string(s) + "'");
  }
  return value;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
}

std::string join_reals(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out.push_back(' ');
    out += format_real(values[i]);
  }
  return out;
}

std::vector<double> parse_reals(std::string_view field) {
  std::vector<double> out;
  if (field.empty()) return out;
  for (auto tok : split_fields(field, ' ')) out.push_back(parse_real(tok));
  return out;
}

void write_record(std::ostream& out, const TrajectoryRecord& rec) {
  if (!rec.poses.empty() && rec.poses.size() != rec.trajectory.size()) {
    throw ValidationError("pose list must cover every step");
  }
  if (rec.labels.size() != rec.segments.size()) throw ValidationError("one label slot per segment required");
  out << kMagic << '\t' << kVersion << '\n';
  out << "trajectory\t" << rec.trajectory_id << '\t' << rec.trajectory.env_seed << '\t'
      << rec.trajectory.policy_version << '\t' << rec.trajectory.size() << '\n';
  if (rec.query_id) out << "query\t" << *rec.query_id << '\t' << rec.round << '\n';
  for (const auto& tr : rec.trajectory.transitions) {
    out << "step\t" << tr.t << '\t' << join_reals(tr.state.values) << '\t' << join_reals(tr.action.values) << '\t'
        << format_real(tr.reward) << '\t' << (tr.done ? 1 : 0) << '\n';
  }
  for (std::size_t t = 0; t < rec.poses.size(); ++t) out << "pose\t" << t << '\t' << join_reals(rec.poses[t]) << '\n';
  for (std::size_t i = 0; i < rec.segments.size(); ++i) {
    out << "segment\t" << i << '\t' << rec.segments[i].start << '\t' << rec.segments[i].end << '\t';
    if (rec.labels[i]) {
      out << *rec.labels[i];
    } else {
      out << '-';
    }
    out << '\n';
  }
  out << "end\n";
}

std::string to_record_string(const TrajectoryRecord& rec) {
  std::ostringstream os;
  write_record(os, rec);
  return os.str();
}

TrajectoryRecord parse_record(std::string_view text) {
  const auto lines = split_lines(text);
  std::size_t i = 0;
  auto rec = parse_one(lines, i);
  if (i != lines.size()) throw ValidationError("trailing content after record");
  return rec;
}

std::vector<TrajectoryRecord> parse_records(std::string_view text) {
  const auto lines = split_lines(text);
  std::vector<TrajectoryRecord> out;
  std::size_t i = 0;
  while (i < lines.size()) out.push_back(parse_one(lines, i));
  return out;
}

}  // namespace rlsf
