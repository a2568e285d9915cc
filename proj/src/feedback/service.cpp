#include "rlsf/feedback/service.hpp"

#include <httplib.h>

#include "rlsf/core/errors.hpp"

namespace rlsf::feedback {

int http_status(SubmitStatus s) {
  switch (s) {
    case SubmitStatus::accepted: return 200;
    case SubmitStatus::unknown_query: return 404;
    case SubmitStatus::duplicate: return 409;
    case SubmitStatus::invalid: return 400;
  }
  return 500;
}

FeedbackService::FeedbackService() = default;

FeedbackService::~FeedbackService() { stop(); }

void FeedbackService::enqueue(const std::vector<FeedbackQuery>& queries, std::int64_t round) {
  {
    std::lock_guard lock(mu_);
    round_ = round;
    for (const auto& q : queries) {
      TrajectoryRecord rec = q.record;
      rec.query_id = q.query_id;
      rec.round = q.round;
      rec.labels.assign(rec.segments.size(), std::nullopt);
      queries_[q.query_id] = std::move(rec);
    }
  }
  cv_.notify_all();
}

SubmitStatus FeedbackService::submit(std::uint64_t query_id, const std::vector<int>& labels, std::string* message) {
  SubmitStatus status = SubmitStatus::accepted;
  std::string msg = "ok";
  {
    std::lock_guard lock(mu_);
    const auto it = queries_.find(query_id);
    if (it == queries_.end()) {
      status = SubmitStatus::unknown_query;
      msg = "unknown query " + std::to_string(query_id);
    } else if (answers_.count(query_id)) {
      status = SubmitStatus::duplicate;
      msg = "query " + std::to_string(query_id) + " already answered";
    } else {
      FeedbackAnswer a{query_id, labels};
      try {
        check_answer(it->second, a);
        answers_.emplace(query_id, std::move(a));
      } catch (const ValidationError& e) {
        status = SubmitStatus::invalid;
        msg = e.what();
      }
    }
  }
  if (message) *message = msg;
  if (status == SubmitStatus::accepted) cv_.notify_all();
  return status;
}

std::string FeedbackService::pending_text() const {
  std::lock_guard lock(mu_);
  std::string out;
  for (const auto& [id, rec] : queries_) {
    if (answers_.count(id)) continue;
    out += "query\t" + std::to_string(id) + "\t" + std::to_string(rec.trajectory_id) + "\t" +
           std::to_string(rec.round) + "\t" + std::to_string(rec.segments.size()) + "\n";
  }
  return out;
}

std::optional<std::string> FeedbackService::query_text(std::uint64_t query_id) const {
  std::lock_guard lock(mu_);
  const auto it = queries_.find(query_id);
  if (it == queries_.end()) return std::nullopt;
  return to_record_string(it->second);
}

std::string FeedbackService::status_text() const {
  std::lock_guard lock(mu_);
  std::size_t pending = 0;
  for (const auto& [id, rec] : queries_) pending += answers_.count(id) ? 0 : 1;
  return "status\tround\t" + std::to_string(round_) + "\nstatus\tpending\t" + std::to_string(pending) +
         "\nstatus\tanswered\t" + std::to_string(answers_.size()) + "\n";
}

std::size_t FeedbackService::pending_count() const {
  std::lock_guard lock(mu_);
  std::size_t pending = 0;
  for (const auto& [id, rec] : queries_) pending += answers_.count(id) ? 0 : 1;
  return pending;
}

bool FeedbackService::wait_all(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [&] {
    for (const auto& [id, rec] : queries_) {
      if (!answers_.count(id)) return false;
    }
    return true;
  });
}

std::optional<FeedbackAnswer> FeedbackService::answer(std::uint64_t query_id) const {
  std::lock_guard lock(mu_);
  const auto it = answers_.find(query_id);
  if (it == answers_.end()) return std::nullopt;
  return it->second;
}

int FeedbackService::start(const std::string& host, int port) {
  if (server_) throw StateError("feedback service already running");
  server_ = std::make_unique<httplib::Server>();
  auto& srv = *server_;
  srv.Get("/queries", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(pending_text(), "text/plain");
  });
  srv.Get(R"(/queries/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto text = query_text(std::stoull(req.matches[1].str()));
    if (!text) {
      res.status = 404;
      res.set_content("unknown query\n", "text/plain");
      return;
    }
    res.set_content(*text, "text/plain");
  });
  srv.Post(R"(/queries/(\d+)/labels)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto id = std::stoull(req.matches[1].str());
    std::string msg;
    SubmitStatus status;
    try {
      status = submit(id, parse_label_line(req.body), &msg);
    } catch (const ValidationError& e) {
      status = SubmitStatus::invalid;
      msg = e.what();
    }
    res.status = http_status(status);
    res.set_content(msg + "\n", "text/plain");
  });
  srv.Get("/status", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(status_text(), "text/plain");
  });

  const int bound = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    server_.reset();
    throw std::runtime_error("feedback service could not bind " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return bound;
}

void FeedbackService::stop() {
  if (!server_) return;
  server_->stop();
  if (thread_.joinable()) thread_.join();
  server_.reset();
}

bool FeedbackService::running() const { return server_ && server_->is_running(); }

std::vector<FeedbackAnswer> ScriptedChannel::collect(const std::vector<FeedbackQuery>& queries, std::int64_t) {
  std::vector<FeedbackAnswer> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(scripted_answer(q));
  return out;
}

std::vector<FeedbackAnswer> ServiceChannel::collect(const std::vector<FeedbackQuery>& queries, std::int64_t round) {
  if (queries.empty()) return {};
  service_.enqueue(queries, round);
  log_info("waiting for " + std::to_string(queries.size()) + " human answer(s) for round " + std::to_string(round));
  const bool complete = service_.wait_all(options_.timeout);
  std::vector<FeedbackAnswer> out;
  out.reserve(queries.size());
  std::size_t missing = 0;
  for (const auto& q : queries) {
    if (auto a = service_.answer(q.query_id)) {
      out.push_back(*a);
      continue;
    }
    ++missing;
    if (options_.on_timeout == TimeoutPolicy::fallback) out.push_back(scripted_answer(q));
  }
  if (!complete && missing > 0) {
    if (options_.on_timeout == TimeoutPolicy::abort) {
      throw FeedbackTimeout("feedback timeout: " + std::to_string(missing) + " query(ies) unanswered in round " +
                            std::to_string(round));
    }
    log_warn("feedback timeout: " + std::to_string(missing) + " query(ies) answered by the scripted fallback");
  }
  return out;
}

}  // namespace rlsf::feedback
