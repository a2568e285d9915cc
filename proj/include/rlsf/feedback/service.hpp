#pragma once

// Between-rounds human feedback bridge. The labeling UI polls
//   GET  /queries                 pending queries, one "query" line each
//   GET  /queries/{id}            full trajectory record (poses included)
//   POST /queries/{id}/labels     body "labels<TAB>1 0 ..." (one label per segment)
//   GET  /status                  round, pending and answered counts
// Ground-truth costs are never served.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rlsf/feedback/feedback.hpp"

namespace httplib {
class Server;
}

namespace rlsf::feedback {

enum class SubmitStatus { accepted, unknown_query, duplicate, invalid };

/// HTTP status used for each submit outcome (200, 404, 409, 400).
int http_status(SubmitStatus s);

class FeedbackService {
 public:
  FeedbackService();
  ~FeedbackService();
  FeedbackService(const FeedbackService&) = delete;
  FeedbackService& operator=(const FeedbackService&) = delete;

  /// Publishes a batch of queries for `round`. Earlier unanswered queries stay pending.
  void enqueue(const std::vector<FeedbackQuery>& queries, std::int64_t round);

  /// Single-writer answer intake; the first valid answer per query wins.
  SubmitStatus submit(std::uint64_t query_id, const std::vector<int>& labels, std::string* message = nullptr);

  std::string pending_text() const;
  std::optional<std::string> query_text(std::uint64_t query_id) const;
  std::string status_text() const;

  std::size_t pending_count() const;
  /// Blocks until every enqueued query is answered or `timeout` elapses.
  bool wait_all(std::chrono::milliseconds timeout);
  std::optional<FeedbackAnswer> answer(std::uint64_t query_id) const;

  /// Starts listening on a background thread; port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();
  bool running() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::uint64_t, TrajectoryRecord> queries_;
  std::map<std::uint64_t, FeedbackAnswer> answers_;
  std::int64_t round_ = 0;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

enum class TimeoutPolicy { abort, fallback };

struct CollectOptions {
  std::chrono::milliseconds timeout = std::chrono::minutes(30);
  TimeoutPolicy on_timeout = TimeoutPolicy::abort;
};

/// Raised when answers do not arrive in time and fallback is disabled.
class FeedbackTimeout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evaluator backend. collect() returns one answer per query, in query order.
class FeedbackChannel {
 public:
  virtual ~FeedbackChannel() = default;
  virtual std::string name() const = 0;
  virtual std::vector<FeedbackAnswer> collect(const std::vector<FeedbackQuery>& queries, std::int64_t round) = 0;
};

/// Ground-truth script: answers immediately.
class ScriptedChannel final : public FeedbackChannel {
 public:
  std::string name() const override { return "scripted"; }
  std::vector<FeedbackAnswer> collect(const std::vector<FeedbackQuery>& queries, std::int64_t round) override;
};

/// Human evaluator through a FeedbackService; blocks until answered.
class ServiceChannel final : public FeedbackChannel {
 public:
  ServiceChannel(FeedbackService& service, CollectOptions options) : service_(service), options_(options) {}
  std::string name() const override { return "human"; }
  std::vector<FeedbackAnswer> collect(const std::vector<FeedbackQuery>& queries, std::int64_t round) override;

 private:
  FeedbackService& service_;
  CollectOptions options_;
};

}  // namespace rlsf::feedback
