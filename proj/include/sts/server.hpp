#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>

#include "sts/http.hpp"

#include "sts/error.hpp"
#include "sts/live.hpp"
#include "sts/store.hpp"
#include "sts/timeutil.hpp"
#include "sts/wire.hpp"

namespace sts {

inline int http_status(ErrorKind k) noexcept {
  switch (k) {
    case ErrorKind::SchemaViolation:
    case ErrorKind::InvalidArgument: return 400;
    case ErrorKind::NotFound: return 404;
    case ErrorKind::ModeMismatch:
    case ErrorKind::ConflictingResubmission: return 409;
    default: return 500;
  }
}

/// Parses the GET filter parameters; malformed values raise InvalidArgument.
inline TrialQuery parse_trial_query(const httplib::Params& params) {
  TrialQuery q;
  auto parse_count = [](const std::string& name, const std::string& v, std::size_t lo, std::size_t hi) {
    std::size_t pos = 0;
    unsigned long long n = 0;
    try {
      if (v.empty() || v[0] == '-' || v[0] == '+') throw std::invalid_argument(v);
      n = std::stoull(v, &pos);
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, name + " must be a non-negative integer");
    }
    if (pos != v.size() || n < lo || n > hi)
      throw Error(ErrorKind::InvalidArgument,
                  name + " must be an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<std::size_t>(n);
  };
  for (const auto& [key, value] : params) {
    if (key == "user_id") {
      if (value.empty()) throw Error(ErrorKind::InvalidArgument, "user_id must be non-empty");
      q.user_id = value;
    } else if (key == "label") {
      if (value.empty()) throw Error(ErrorKind::InvalidArgument, "label must be non-empty");
      q.label = value;
    } else if (key == "after") {
      q.after = parse_rfc3339(value);
      if (!q.after) throw Error(ErrorKind::InvalidArgument, "after must be an RFC 3339 timestamp");
    } else if (key == "limit") {
      q.limit = parse_count(key, value, 1, 1000);
    } else if (key == "offset") {
      q.offset = parse_count(key, value, 0, std::numeric_limits<std::uint32_t>::max());
    } else {
      throw Error(ErrorKind::InvalidArgument, "unknown query parameter " + key);
    }
  }
  return q;
}

/// HTTP front end of the trial store: separate /train and /test services,
/// labeling, and the live reading stream.
class IngestionServer {
public:
  IngestionServer(TrialStore& store, LiveHub& hub, std::ostream* log = nullptr)
      : store_(store), hub_(hub), log_(log) {
    svr_.new_task_queue = [] { return new httplib::ThreadPool(32); };
    svr_.set_keep_alive_max_count(1000);
    routes();
  }

  ~IngestionServer() { stop(); }

  IngestionServer(const IngestionServer&) = delete;
  IngestionServer& operator=(const IngestionServer&) = delete;

  /// Binds and serves on a background thread; port 0 picks a free port.
  int start(const std::string& host, int port) {
    const int bound = port == 0 ? svr_.bind_to_any_port(host) : (svr_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { svr_.listen_after_bind(); });
    svr_.wait_until_ready();
    return bound;
  }

  /// Binds and serves on the calling thread until stop(). on_bound sees the
  /// actual port before the first request is accepted.
  void run(const std::string& host, int port, const std::function<void(int)>& on_bound = {}) {
    const int bound = port == 0 ? svr_.bind_to_any_port(host) : (svr_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
    if (on_bound) on_bound(bound);
    svr_.listen_after_bind();
  }

  void stop() {
    svr_.stop();
    if (thread_.joinable()) thread_.join();
  }

private:
  static void send_json(httplib::Response& res, int status, const wire::json& body) {
    res.status = status;
    res.set_content(wire::canonical(body), "application/json");
  }

  static void send_error(httplib::Response& res, const Error& e) {
    send_json(res, http_status(e.kind()), {{"error", std::string(to_string(e.kind()))}, {"message", e.what()}});
  }

  template <typename F>
  auto guarded(F f) {
    return [f = std::move(f)](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        send_error(res, e);
      } catch (const std::exception& e) {
        send_json(res, 500, {{"error", "Internal"}, {"message", e.what()}});
      }
    };
  }

  void routes() {
    svr_.Post(R"(/api/v1/(train|test)/trials)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const Mode endpoint = *mode_from_string(req.matches[1].str());
      const TrialPacket p = wire::parse(req.body);
      if (p.mode != endpoint)
        throw Error(ErrorKind::ModeMismatch, std::string(to_string(p.mode)) + " trial posted to the " +
                                                 std::string(to_string(endpoint)) + " service");
      const SubmitResult r = store_.submit(p, format_rfc3339(now_ms()));
      send_json(res, r.outcome == SubmitOutcome::Created ? 201 : 200,
                {{"trial_id", p.trial_id}, {"revision", r.revision}});
    }));

    svr_.Get(R"(/api/v1/(train|test)/trials)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const Mode mode = *mode_from_string(req.matches[1].str());
      const TrialQuery q = parse_trial_query(req.params);
      wire::json arr = wire::json::array();
      for (const StoredTrial& t : store_.query(mode, q)) arr.push_back(stored_to_json(t));
      send_json(res, 200, arr);
    }));

    svr_.Get(R"(/api/v1/(train|test)/trials/([^/]+))",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               const Mode mode = *mode_from_string(req.matches[1].str());
               const auto t = store_.get(req.matches[2].str());
               if (!t || t->packet.mode != mode)
                 throw Error(ErrorKind::NotFound, "trial " + req.matches[2].str() + " not found");
               send_json(res, 200, stored_to_json(*t));
             }));

    svr_.Put(R"(/api/v1/(train|test)/trials/([^/]+)/label)",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[2].str();
               const wire::json body = wire::parse_json(req.body);
               if (!body.is_object() || !body.contains("label") || !body["label"].is_string() ||
                   body["label"].get<std::string>().empty())
                 throw Error(ErrorKind::SchemaViolation, "label must be a non-empty string");
               if (req.matches[1].str() == "test") {
                 if (!store_.get(id)) throw Error(ErrorKind::NotFound, "trial " + id + " not found");
                 throw Error(ErrorKind::ModeMismatch, "test trials cannot be labeled");
               }
               const StoredTrial t = store_.relabel(id, body["label"].get<std::string>());
               send_json(res, 200, stored_to_json(t));
             }));

    svr_.Get("/api/v1/live", [this](const httplib::Request&, httplib::Response& res) {
      auto cursor = hub_.subscribe();
      if (!cursor) {
        res.set_content(sse_end("no-session"), "text/event-stream");
        return;
      }
      auto state = std::make_shared<LiveHub::Cursor>(*cursor);
      res.set_chunked_content_provider("text/event-stream", [this, state](std::size_t, httplib::DataSink& sink) {
        std::vector<LiveEvent> batch;
        const auto st = hub_.poll(*state, batch, std::chrono::milliseconds(200));
        std::string chunk;
        for (const LiveEvent& e : batch) chunk += sse_sample(e);
        if (st == LiveHub::Poll::Ended) chunk += sse_end("session-ended");
        if (!chunk.empty() && !sink.write(chunk.data(), chunk.size())) return false;
        if (st == LiveHub::Poll::Ended) sink.done();
        return true;
      });
    });

    svr_.set_logger([this](const httplib::Request& req, const httplib::Response& res) {
      if (!log_) return;
      const wire::json line = {{"ts", format_rfc3339(now_ms())},
                               {"method", req.method},
                               {"path", req.path},
                               {"status", res.status},
                               {"remote", req.remote_addr}};
      std::lock_guard lock(log_mu_);
      *log_ << wire::canonical(line) << '\n' << std::flush;
    });
  }

  static std::string sse_sample(const LiveEvent& e) {
    const wire::json d = {{"t_ms", e.t_ms}, {"channel", std::string(channel_key(e.channel))}, {"kg", e.kg}};
    return "event: sample\ndata: " + wire::canonical(d) + "\n\n";
  }

  static std::string sse_end(const std::string& reason) {
    return "event: end\ndata: " + wire::canonical({{"reason", reason}}) + "\n\n";
  }

  TrialStore& store_;
  LiveHub& hub_;
  std::ostream* log_;
  std::mutex log_mu_;
  httplib::Server svr_;
  std::thread thread_;
};

}  // namespace sts
