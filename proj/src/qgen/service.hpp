#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "qgen/quest.hpp"
#include "qgen/valid.hpp"

namespace httplib {
class Server;
}

namespace qgen::service {

struct ServiceOptions {
  std::string data_dir;    // *.json questionnaires
  std::string event_log;   // append-only JSONL; empty = in memory only
  std::string cors_origin; // empty = no CORS headers
  std::string rater_token; // empty = score posts need no token
  std::int64_t session_ttl = 24 * 3600;
  std::function<std::int64_t()> clock;  // seconds; defaults to system time
};

struct Response {
  int status = 200;
  std::string body;  // JSON
  std::map<std::string, std::string> headers;
};

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;
  std::string body;
};

class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Transport-independent entry point; the HTTP server forwards here.
  Response handle(const Request& request);

  std::size_t questionnaire_count() const { return questionnaires_.size(); }
  std::size_t replayed_events() const { return replayed_; }

  // Blocks until stop(). Returns false if the address cannot be bound.
  bool listen(const std::string& host, int port);
  // Binds (port 0 = ephemeral) and serves on a background thread.
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Session {
    std::string questionnaire;
    int node = 0;
    std::vector<std::pair<int, bool>> history;
    std::int64_t last_active = 0;
  };
  struct StoredScore {
    valid::ScoreRecord record;
    std::uint64_t seed = 0;
  };

  void load_questionnaires();
  void replay();
  void apply(const nlohmann::json& event, bool from_log);
  void append(const nlohmann::json& event);
  std::int64_t now() const;

  Response dispatch(const Request& r);
  Response list_questionnaires() const;
  Response get_questionnaire(const std::string& id) const;
  Response create_session(const Request& r);
  Response get_session(const std::string& id);
  Response answer(const std::string& id, const Request& r);
  Response get_sheet(const std::string& qid, const Request& r) const;
  Response post_score(const std::string& qid, const Request& r);
  Response get_report(const std::string& qid) const;

  nlohmann::json session_json(const std::string& id, const Session& s) const;
  std::string new_session_id();
  const quest::Questionnaire* find(const std::string& id) const;

  ServiceOptions options_;
  std::map<std::string, quest::Questionnaire> questionnaires_;
  std::map<std::string, Session> sessions_;
  std::map<std::string, std::vector<StoredScore>> scores_;  // questionnaire -> records
  std::size_t replayed_ = 0;
  mutable std::mutex mu_;

  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::atomic<bool> running_{false};
};

}  // namespace qgen::service
