#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <sqlite3.h>

#include "sts/acquisition.hpp"
#include "sts/error.hpp"
#include "sts/timeutil.hpp"
#include "sts/wire.hpp"

namespace sts {

enum class TrialStatus { Unlabeled, Labeled };

constexpr std::string_view to_string(TrialStatus s) noexcept {
  return s == TrialStatus::Labeled ? "labeled" : "unlabeled";
}

/// A persisted trial: the packet as submitted (label reflects the latest
/// relabel) plus server-assigned fields.
struct StoredTrial {
  TrialPacket packet;
  std::string received_at;
  int revision = 1;
  TrialStatus status = TrialStatus::Unlabeled;

  friend bool operator==(const StoredTrial&, const StoredTrial&) = default;
};

inline wire::json stored_to_json(const StoredTrial& t) {
  wire::json j = wire::envelope_to_json(t.packet);
  j["received_at"] = t.received_at;
  j["revision"] = t.revision;
  j["status"] = std::string(to_string(t.status));
  return j;
}

inline StoredTrial stored_from_json(const wire::json& j) {
  wire::json env = {{"schema_version", j.at("schema_version")}, {"payload", j.at("payload")}};
  StoredTrial t;
  t.packet = wire::envelope_from_json(env);
  t.received_at = j.at("received_at").get<std::string>();
  t.revision = j.at("revision").get<int>();
  t.status = j.at("status").get<std::string>() == "labeled" ? TrialStatus::Labeled : TrialStatus::Unlabeled;
  return t;
}

struct TrialQuery {
  std::optional<std::string> user_id;
  std::optional<std::string> label;
  std::optional<SysTime> after;  ///< strictly later received_at
  std::size_t limit = 100;
  std::size_t offset = 0;
};

enum class SubmitOutcome { Created, Replayed };

struct SubmitResult {
  SubmitOutcome outcome = SubmitOutcome::Created;
  int revision = 1;
};

namespace detail {

struct DbClose {
  void operator()(sqlite3* db) const noexcept { sqlite3_close_v2(db); }
};
struct StmtFinalize {
  void operator()(sqlite3_stmt* s) const noexcept { sqlite3_finalize(s); }
};
using DbPtr = std::unique_ptr<sqlite3, DbClose>;
using StmtPtr = std::unique_ptr<sqlite3_stmt, StmtFinalize>;

[[noreturn]] inline void db_fail(sqlite3* db, const std::string& what) {
  throw Error(ErrorKind::Io, what + ": " + (db ? sqlite3_errmsg(db) : "unknown sqlite error"));
}

inline void exec(sqlite3* db, const char* sql) {
  char* err = nullptr;
  if (sqlite3_exec(db, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "sqlite error";
    sqlite3_free(err);
    throw Error(ErrorKind::Io, std::string("sql failed (") + sql + "): " + msg);
  }
}

inline StmtPtr prepare(sqlite3* db, const std::string& sql) {
  sqlite3_stmt* s = nullptr;
  if (sqlite3_prepare_v2(db, sql.c_str(), -1, &s, nullptr) != SQLITE_OK) db_fail(db, "prepare");
  return StmtPtr(s);
}

inline void bind(sqlite3_stmt* s, int idx, const std::string& v) {
  sqlite3_bind_text(s, idx, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
}
inline void bind(sqlite3_stmt* s, int idx, std::int64_t v) { sqlite3_bind_int64(s, idx, v); }
inline void bind_null(sqlite3_stmt* s, int idx) { sqlite3_bind_null(s, idx); }

inline std::string column_text(sqlite3_stmt* s, int col) {
  const auto* p = sqlite3_column_text(s, col);
  return p ? std::string(reinterpret_cast<const char*>(p), static_cast<std::size_t>(sqlite3_column_bytes(s, col)))
           : std::string();
}

}  // namespace detail

/// Embedded trial store on SQLite in WAL mode with synchronous commits:
/// a submit returns only after its transaction is on disk. Writes are
/// serialized; reads use their own connections and see committed rows only.
class TrialStore {
public:
  explicit TrialStore(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    writer_ = open(SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE);
    detail::exec(writer_.get(), "PRAGMA journal_mode=WAL;");
    detail::exec(writer_.get(), "PRAGMA synchronous=FULL;");
    detail::exec(writer_.get(),
                 "CREATE TABLE IF NOT EXISTS trials ("
                 " trial_id TEXT PRIMARY KEY,"
                 " mode TEXT NOT NULL,"
                 " user_id TEXT NOT NULL,"
                 " label TEXT,"
                 " received_at TEXT NOT NULL,"
                 " revision INTEGER NOT NULL,"
                 " envelope TEXT NOT NULL);"
                 "CREATE INDEX IF NOT EXISTS trials_order ON trials(mode, received_at, trial_id);"
                 "CREATE INDEX IF NOT EXISTS trials_user ON trials(mode, user_id);");
  }

  TrialStore(const TrialStore&) = delete;
  TrialStore& operator=(const TrialStore&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }

  /// Inserts a new trial, or acknowledges an identical replay. A different
  /// payload under an existing trial_id raises ConflictingResubmission.
  SubmitResult submit(const TrialPacket& p, const std::string& received_at) {
    validate_packet(p);
    const std::string envelope = wire::serialize(p);
    std::lock_guard lock(write_mu_);
    sqlite3* db = writer_.get();
    detail::exec(db, "BEGIN IMMEDIATE;");
    try {
      auto sel = detail::prepare(db, "SELECT envelope, revision FROM trials WHERE trial_id = ?1;");
      detail::bind(sel.get(), 1, p.trial_id);
      const int rc = sqlite3_step(sel.get());
      if (rc == SQLITE_ROW) {
        const std::string existing = detail::column_text(sel.get(), 0);
        const int revision = sqlite3_column_int(sel.get(), 1);
        detail::exec(db, "ROLLBACK;");
        if (existing != envelope)
          throw Error(ErrorKind::ConflictingResubmission,
                      "trial " + p.trial_id + " already stored with a different payload");
        return {SubmitOutcome::Replayed, revision};
      }
      if (rc != SQLITE_DONE) detail::db_fail(db, "lookup");
      auto ins = detail::prepare(db,
                                 "INSERT INTO trials(trial_id, mode, user_id, label, received_at, revision, envelope)"
                                 " VALUES(?1, ?2, ?3, ?4, ?5, 1, ?6);");
      detail::bind(ins.get(), 1, p.trial_id);
      detail::bind(ins.get(), 2, std::string(to_string(p.mode)));
      detail::bind(ins.get(), 3, p.user_id);
      if (p.label) detail::bind(ins.get(), 4, *p.label);
      else detail::bind_null(ins.get(), 4);
      detail::bind(ins.get(), 5, received_at);
      detail::bind(ins.get(), 6, envelope);
      if (sqlite3_step(ins.get()) != SQLITE_DONE) detail::db_fail(db, "insert");
      detail::exec(db, "COMMIT;");
      return {SubmitOutcome::Created, 1};
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ConflictingResubmission && !sqlite3_get_autocommit(db))
        sqlite3_exec(db, "ROLLBACK;", nullptr, nullptr, nullptr);
      throw;
    }
  }

  /// Sets the label of a train trial and bumps its revision.
  StoredTrial relabel(const std::string& trial_id, const std::string& label) {
    require(!label.empty(), "label must be non-empty");
    std::lock_guard lock(write_mu_);
    sqlite3* db = writer_.get();
    detail::exec(db, "BEGIN IMMEDIATE;");
    try {
      auto sel = detail::prepare(db, "SELECT mode FROM trials WHERE trial_id = ?1;");
      detail::bind(sel.get(), 1, trial_id);
      const int rc = sqlite3_step(sel.get());
      if (rc == SQLITE_DONE) throw Error(ErrorKind::NotFound, "trial " + trial_id + " not found");
      if (rc != SQLITE_ROW) detail::db_fail(db, "lookup");
      if (detail::column_text(sel.get(), 0) != "train")
        throw Error(ErrorKind::ModeMismatch, "trial " + trial_id + " is a test trial and cannot be labeled");
      auto upd = detail::prepare(db, "UPDATE trials SET label = ?2, revision = revision + 1 WHERE trial_id = ?1;");
      detail::bind(upd.get(), 1, trial_id);
      detail::bind(upd.get(), 2, label);
      if (sqlite3_step(upd.get()) != SQLITE_DONE) detail::db_fail(db, "update");
      detail::exec(db, "COMMIT;");
    } catch (...) {
      if (!sqlite3_get_autocommit(db)) sqlite3_exec(db, "ROLLBACK;", nullptr, nullptr, nullptr);
      throw;
    }
    return *get(trial_id);
  }

  std::optional<StoredTrial> get(const std::string& trial_id) const {
    Reader r(*this);
    auto s = detail::prepare(r.db(), std::string(kSelect) + " WHERE trial_id = ?1;");
    detail::bind(s.get(), 1, trial_id);
    const int rc = sqlite3_step(s.get());
    if (rc == SQLITE_DONE) return std::nullopt;
    if (rc != SQLITE_ROW) detail::db_fail(r.db(), "get");
    return row_to_trial(s.get());
  }

  /// Trials of one mode matching every given filter, ordered by
  /// (received_at, trial_id).
  std::vector<StoredTrial> query(Mode mode, const TrialQuery& q) const {
    std::string sql = std::string(kSelect) + " WHERE mode = ?1";
    if (q.user_id) sql += " AND user_id = ?2";
    if (q.label) sql += " AND label = ?3";
    if (q.after) sql += " AND received_at > ?4";
    sql += " ORDER BY received_at, trial_id LIMIT ?5 OFFSET ?6;";
    Reader r(*this);
    auto s = detail::prepare(r.db(), sql);
    detail::bind(s.get(), 1, std::string(to_string(mode)));
    if (q.user_id) detail::bind(s.get(), 2, *q.user_id);
    if (q.label) detail::bind(s.get(), 3, *q.label);
    if (q.after) detail::bind(s.get(), 4, format_rfc3339(*q.after));
    detail::bind(s.get(), 5, static_cast<std::int64_t>(q.limit));
    detail::bind(s.get(), 6, static_cast<std::int64_t>(q.offset));
    std::vector<StoredTrial> out;
    int rc;
    while ((rc = sqlite3_step(s.get())) == SQLITE_ROW) out.push_back(row_to_trial(s.get()));
    if (rc != SQLITE_DONE) detail::db_fail(r.db(), "query");
    return out;
  }

  std::size_t count(std::optional<Mode> mode = std::nullopt) const {
    Reader r(*this);
    auto s = detail::prepare(r.db(), mode ? "SELECT COUNT(*) FROM trials WHERE mode = ?1;" : "SELECT COUNT(*) FROM trials;");
    if (mode) detail::bind(s.get(), 1, std::string(to_string(*mode)));
    if (sqlite3_step(s.get()) != SQLITE_ROW) detail::db_fail(r.db(), "count");
    return static_cast<std::size_t>(sqlite3_column_int64(s.get(), 0));
  }

private:
  static constexpr const char* kSelect = "SELECT envelope, label, received_at, revision FROM trials";

  detail::DbPtr open(int flags) const {
    sqlite3* raw = nullptr;
    const int rc = sqlite3_open_v2(path_.c_str(), &raw, flags | SQLITE_OPEN_NOMUTEX, nullptr);
    detail::DbPtr db(raw);
    if (rc != SQLITE_OK) detail::db_fail(raw, "open " + path_.string());
    sqlite3_busy_timeout(raw, 5000);
    return db;
  }

  /// Borrows a read connection from the pool for the duration of a query.
  class Reader {
  public:
    explicit Reader(const TrialStore& s) : store_(s) {
      {
        std::lock_guard lock(s.pool_mu_);
        if (!s.readers_.empty()) {
          db_ = std::move(s.readers_.back());
          s.readers_.pop_back();
        }
      }
      if (!db_) db_ = s.open(SQLITE_OPEN_READONLY);
    }
    ~Reader() {
      std::lock_guard lock(store_.pool_mu_);
      store_.readers_.push_back(std::move(db_));
    }
    sqlite3* db() const noexcept { return db_.get(); }

  private:
    const TrialStore& store_;
    detail::DbPtr db_;
  };

  static StoredTrial row_to_trial(sqlite3_stmt* s) {
    StoredTrial t;
    t.packet = wire::parse(detail::column_text(s, 0));
    if (sqlite3_column_type(s, 1) == SQLITE_NULL) t.packet.label.reset();
    else t.packet.label = detail::column_text(s, 1);
    t.received_at = detail::column_text(s, 2);
    t.revision = sqlite3_column_int(s, 3);
    t.status = t.packet.label ? TrialStatus::Labeled : TrialStatus::Unlabeled;
    return t;
  }

  std::filesystem::path path_;
  detail::DbPtr writer_;
  std::mutex write_mu_;
  mutable std::mutex pool_mu_;
  mutable std::vector<detail::DbPtr> readers_;
};

}  // namespace sts
