#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sts/http.hpp"

#include "sts/error.hpp"
#include "sts/store.hpp"
#include "sts/wire.hpp"

namespace sts {

struct HttpReply {
  int status = 0;
  std::string body;
};

/// One server-sent event from /api/v1/live.
struct SseEvent {
  std::string event;
  wire::json data;
};

/// Minimal client for the ingestion service, used by the device simulator and
/// the classifier's pull loop.
class IngestionClient {
public:
  explicit IngestionClient(const std::string& base_url) : cli_(base_url) {
    cli_.set_connection_timeout(5);
    cli_.set_read_timeout(120);
    cli_.set_write_timeout(120);
  }

  HttpReply post_raw(Mode endpoint, const std::string& body) {
    auto r = cli_.Post(trials_path(endpoint), body, "application/json");
    return reply(r);
  }

  /// POSTs a packet to the service matching its mode; returns the status
  /// (201 or 200) or throws the server's error.
  int post_trial(const TrialPacket& p) {
    HttpReply r = post_raw(p.mode, wire::serialize(p));
    check(r);
    return r.status;
  }

  HttpReply get_raw(const std::string& path, const httplib::Params& params = {}) {
    auto r = cli_.Get(path, params, httplib::Headers{});
    return reply(r);
  }

  /// Pulls every trial matching the filters, paging with `page` rows.
  std::vector<StoredTrial> pull(Mode mode, const TrialQuery& filters = {}, std::size_t page = 100) {
    std::vector<StoredTrial> out;
    for (std::size_t offset = 0;; offset += page) {
      httplib::Params params{{"limit", std::to_string(page)}, {"offset", std::to_string(offset)}};
      if (filters.user_id) params.emplace("user_id", *filters.user_id);
      if (filters.label) params.emplace("label", *filters.label);
      if (filters.after) params.emplace("after", format_rfc3339(*filters.after));
      HttpReply r = get_raw(trials_path(mode), params);
      check(r);
      const auto arr = wire::parse_json(r.body);
      for (const auto& j : arr) out.push_back(stored_from_json(j));
      if (arr.size() < page) break;
    }
    return out;
  }

  std::optional<StoredTrial> get(Mode mode, const std::string& trial_id) {
    HttpReply r = get_raw(trials_path(mode) + "/" + trial_id);
    if (r.status == 404) return std::nullopt;
    check(r);
    return stored_from_json(wire::parse_json(r.body));
  }

  HttpReply put_label_raw(Mode mode, const std::string& trial_id, const std::string& label) {
    auto r = cli_.Put(trials_path(mode) + "/" + trial_id + "/label", wire::canonical({{"label", label}}),
                      "application/json");
    return reply(r);
  }

  StoredTrial label(const std::string& trial_id, const std::string& label) {
    HttpReply r = put_label_raw(Mode::Train, trial_id, label);
    check(r);
    return stored_from_json(wire::parse_json(r.body));
  }

  /// Reads the live stream until its terminal event.
  std::vector<SseEvent> live() {
    std::string buf;
    std::vector<SseEvent> events;
    auto r = cli_.Get("/api/v1/live", [&](const char* data, std::size_t n) {
      buf.append(data, n);
      for (std::size_t pos; (pos = buf.find("\n\n")) != std::string::npos;) {
        events.push_back(parse_sse(buf.substr(0, pos)));
        buf.erase(0, pos + 2);
      }
      return true;
    });
    if (!r) throw Error(ErrorKind::Transport, "live stream failed: " + httplib::to_string(r.error()));
    return events;
  }

  static std::string trials_path(Mode m) { return "/api/v1/" + std::string(to_string(m)) + "/trials"; }

  /// Throws an Error mirroring a non-2xx reply.
  static void check(const HttpReply& r) {
    if (r.status >= 200 && r.status < 300) return;
    ErrorKind kind = ErrorKind::Transport;
    std::string msg = "HTTP " + std::to_string(r.status);
    try {
      const auto j = wire::json::parse(r.body);
      const std::string name = j.value("error", "");
      for (auto k : {ErrorKind::SchemaViolation, ErrorKind::InvalidArgument, ErrorKind::NotFound,
                     ErrorKind::ModeMismatch, ErrorKind::ConflictingResubmission})
        if (name == to_string(k)) kind = k;
      msg += ": " + j.value("message", "");
    } catch (const std::exception&) {
    }
    throw Error(kind, msg);
  }

private:
  static HttpReply reply(const httplib::Result& r) {
    if (!r) throw Error(ErrorKind::Transport, "request failed: " + httplib::to_string(r.error()));
    return {r->status, r->body};
  }

  static SseEvent parse_sse(const std::string& block) {
    SseEvent ev;
    std::size_t start = 0;
    while (start <= block.size()) {
      const std::size_t end = std::min(block.find('\n', start), block.size());
      const std::string line = block.substr(start, end - start);
      if (line.rfind("event: ", 0) == 0) ev.event = line.substr(7);
      else if (line.rfind("data: ", 0) == 0) ev.data = wire::json::parse(line.substr(6));
      start = end + 1;
    }
    return ev;
  }

  httplib::Client cli_;
};

}  // namespace sts
