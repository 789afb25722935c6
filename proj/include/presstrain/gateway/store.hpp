#pragma once

// Session files under data_dir, written on a dedicated worker thread.
// Files are replaced atomically (write to a temp file, then rename) and a
// file holding a finished session is never rewritten.

#include <cctype>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "presstrain/error.hpp"
#include "presstrain/session_io.hpp"

namespace presstrain::gateway {

inline bool valid_session_id(std::string_view id) {
  if (id.empty() || id.size() > 128) return false;
  for (char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
  return true;
}

struct ExportFiles {
  std::filesystem::path json_path;
  std::filesystem::path csv_path;
  std::string json_text;
  std::string csv_text;
};

/// Outcome of an asynchronous store request: files, or the error raised.
struct ExportReply {
  std::optional<ExportFiles> files;
  std::optional<Error> error;
};

class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
    worker_ = std::thread([this] { work(); });
  }

  ~SessionStore() {
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
  }

  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path json_path(const std::string& id) const { return dir_ / (id + ".json"); }
  std::filesystem::path csv_path(const std::string& id) const { return dir_ / (id + ".csv"); }

  /// Queues a write of `result` as `<id>.json` and `<id>.csv`.
  void save(std::string id, SessionResult result, std::function<void(ExportReply)> done = {}) {
    post([this, id = std::move(id), result = std::move(result), done = std::move(done)] {
      ExportReply reply;
      try {
        reply.files = write_now(id, result);
      } catch (const Error& e) {
        reply.error = e;
      } catch (const std::exception& e) {
        reply.error = Error(ErrorCode::InvalidData, e.what());
      }
      if (done) done(std::move(reply));
    });
  }

  /// Queues a read of a stored session. Requests run in submission order,
  /// so a read queued after a save sees that save.
  void load(std::string id, std::function<void(ExportReply)> done) {
    post([this, id = std::move(id), done = std::move(done)] {
      ExportReply reply;
      try {
        reply.files = read_now(id);
      } catch (const Error& e) {
        reply.error = e;
      }
      done(std::move(reply));
    });
  }

  /// Blocks until everything queued so far has run.
  void flush() {
    std::promise<void> p;
    auto f = p.get_future();
    post([&p] { p.set_value(); });
    f.wait();
  }

  ExportFiles read_now(const std::string& id) const {
    if (!valid_session_id(id)) throw Error(ErrorCode::NotFound, "no session '" + id + "'");
    ExportFiles f{json_path(id), csv_path(id), {}, {}};
    if (!std::filesystem::exists(f.json_path)) throw Error(ErrorCode::NotFound, "no session '" + id + "'");
    f.json_text = slurp(f.json_path);
    f.csv_text = std::filesystem::exists(f.csv_path) ? slurp(f.csv_path) : std::string();
    return f;
  }

  ExportFiles write_now(const std::string& id, const SessionResult& result) const {
    if (!valid_session_id(id)) throw Error(ErrorCode::InvalidInput, "invalid session id '" + id + "'");
    ExportFiles f{json_path(id), csv_path(id), {}, {}};
    if (is_final(f.json_path)) return read_now(id);
    auto j = to_json(result);
    j["id"] = id;
    f.json_text = j.dump(2) + "\n";
    std::ostringstream csv;
    write_session_csv(csv, result);
    f.csv_text = csv.str();
    // CSV first: the JSON file marks the session as present.
    replace_file(f.csv_path, f.csv_text);
    replace_file(f.json_path, f.json_text);
    return f;
  }

 private:
  static std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
  }

  static bool is_final(const std::filesystem::path& p) {
    if (!std::filesystem::exists(p)) return false;
    try {
      const auto j = nlohmann::json::parse(slurp(p));
      return j.value("status", std::string("running")) != "running";
    } catch (const nlohmann::json::exception&) {
      return false;
    }
  }

  static void replace_file(const std::filesystem::path& p, const std::string& text) {
    auto tmp = p;
    tmp += ".tmp";
    {
      std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
      os << text;
      os.flush();
      if (!os) throw Error(ErrorCode::InvalidData, "cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, p);
  }

  void post(std::function<void()> job) {
    {
      std::lock_guard lock(mu_);
      jobs_.push_back(std::move(job));
    }
    cv_.notify_one();
  }

  void work() {
    while (true) {
      std::function<void()> job;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [this] { return stopping_ || !jobs_.empty(); });
        if (jobs_.empty()) return;
        job = std::move(jobs_.front());
        jobs_.pop_front();
      }
      job();
    }
  }

  std::filesystem::path dir_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> jobs_;
  bool stopping_ = false;
  std::thread worker_;
};

}  // namespace presstrain::gateway
