#pragma once

// Line-oriented structured-text record format shared by the run log, the
// feedback service and replay export.
//
//   rlsf-record<TAB>1
//   trajectory<TAB>id<TAB>env_seed<TAB>policy_version<TAB>length
//   query<TAB>query_id<TAB>round                    (optional)
//   step<TAB>t<TAB>state values<TAB>action values<TAB>reward<TAB>done
//   pose<TAB>t<TAB>pose values                        (optional, one per step)
//   segment<TAB>index<TAB>start<TAB>end<TAB>label    (label 1, 0 or -)
//   end
//
// Vector fields are space separated. Reals use the shortest representation
// that round-trips, so parse(write(r)) == r bit for bit.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rlsf/core/types.hpp"

namespace rlsf {

struct TrajectoryRecord {
  std::uint64_t trajectory_id = 0;
  Trajectory trajectory;
  std::optional<std::uint64_t> query_id;
  std::int64_t round = 0;
  /// Per-step render poses (Driver: x y phi v per vehicle; gridworld: row col).
  std::vector<std::vector<double>> poses;
  std::vector<Segment> segments;
  /// One entry per segment; nullopt when unlabeled.
  std::vector<std::optional<int>> labels;

  friend bool operator==(const TrajectoryRecord&, const TrajectoryRecord&) = default;
};

std::string format_real(double v);
double parse_real(std::string_view s);

void write_record(std::ostream& out, const TrajectoryRecord& rec);
std::string to_record_string(const TrajectoryRecord& rec);

/// Parses exactly one record. Throws ValidationError on malformed input.
TrajectoryRecord parse_record(std::string_view text);

/// Parses a stream of concatenated records (the run log layout).
std::vector<TrajectoryRecord> parse_records(std::string_view text);

/// Splits a line on tabs.
std::vector<std::string_view> split_fields(std::string_view line, char sep = '\t');

std::string join_reals(const std::vector<double>& values);
std::vector<double> parse_reals(std::string_view field);

}  // namespace rlsf
