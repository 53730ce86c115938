#include "qgen/service.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "httplib.h"
#include "qgen/error.hpp"

namespace qgen::service {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

Response reply(int status, const json& body) { return {status, body.dump(), {}}; }

Response error(int status, const std::string& message) {
  return reply(status, {{"error", message}});
}

// Splits "/api/a/b" into {"api", "a", "b"}.
std::vector<std::string> segments(const std::string& path) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : path) {
    if (ch == '/') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::optional<json> parse_body(const std::string& body) {
  json j = json::parse(body.empty() ? "{}" : body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

// Header names compare case-insensitively.
const std::string* header(const Request& r, const std::string& name) {
  for (const auto& [k, v] : r.headers) {
    if (k.size() == name.size() &&
        std::equal(k.begin(), k.end(), name.begin(), [](char a, char b) {
          return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
        })) {
      return &v;
    }
  }
  return nullptr;
}

}  // namespace

Service::Service(ServiceOptions options) : options_(std::move(options)) {
  load_questionnaires();
  replay();
}

Service::~Service() { stop(); }

std::int64_t Service::now() const {
  if (options_.clock) return options_.clock();
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void Service::load_questionnaires() {
  if (options_.data_dir.empty()) return;
  if (!fs::is_directory(options_.data_dir)) {
    fail(ErrorCode::kIo, "data directory not found: " + options_.data_dir);
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(options_.data_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      auto q = quest::Questionnaire::load(f.string());
      if (questionnaires_.count(q.id)) {
        spdlog::error("{}: duplicate questionnaire id {}; skipped", f.string(), q.id);
        continue;
      }
      questionnaires_.emplace(q.id, std::move(q));
    } catch (const Error& e) {
      spdlog::error("skipping questionnaire file: {}", e.what());
    }
  }
  spdlog::info("loaded {} questionnaires from {}", questionnaires_.size(), options_.data_dir);
}

void Service::replay() {
  if (options_.event_log.empty() || !fs::exists(options_.event_log)) return;
  std::ifstream in(options_.event_log);
  if (!in) fail(ErrorCode::kIo, "cannot read event log: " + options_.event_log);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json e = json::parse(line, nullptr, false);
    if (e.is_discarded()) {
      spdlog::error("{}:{}: unreadable event; skipped", options_.event_log, line_no);
      continue;
    }
    try {
      apply(e, true);
      ++replayed_;
    } catch (const std::exception& ex) {
      spdlog::error("{}:{}: {}; skipped", options_.event_log, line_no, ex.what());
    }
  }
}

void Service::append(const json& event) {
  if (options_.event_log.empty()) return;
  const std::string line = event.dump() + "\n";
  std::ofstream out(options_.event_log, std::ios::binary | std::ios::app);
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.flush();
  if (!out) fail(ErrorCode::kIo, "cannot append to event log: " + options_.event_log);
}

// Applies a validated event to in-memory state.
void Service::apply(const json& e, bool from_log) {
  const std::string type = e.at("type").get<std::string>();
  const std::int64_t t = e.at("time").get<std::int64_t>();
  if (type == "session_start") {
    const auto qid = e.at("questionnaire").get<std::string>();
    if (!find(qid)) fail(ErrorCode::kNotFound, "unknown questionnaire " + qid);
    sessions_[e.at("session").get<std::string>()] = Session{qid, 0, {}, t};
  } else if (type == "answer") {
    auto it = sessions_.find(e.at("session").get<std::string>());
    if (it == sessions_.end()) fail(ErrorCode::kNotFound, "unknown session");
    Session& s = it->second;
    const auto& node = find(s.questionnaire)->tree.node(s.node);
    if (node.is_leaf()) fail(ErrorCode::kConflict, "session already finished");
    const bool yes = e.at("answer").get<std::string>() == "yes";
    s.history.emplace_back(s.node, yes);
    s.node = yes ? node.yes : node.no;
    s.last_active = t;
  } else if (type == "score") {
    const auto qid = e.at("questionnaire").get<std::string>();
    if (!find(qid)) fail(ErrorCode::kNotFound, "unknown questionnaire " + qid);
    StoredScore s;
    s.record.rater = e.at("rater").get<std::string>();
    s.record.item_id = e.at("item_id").get<std::string>();
    s.record.score = valid::parse_score(e.at("score").get<std::string>());
    s.record.timestamp = e.at("timestamp").get<std::int64_t>();
    s.seed = e.at("seed").get<std::uint64_t>();
    scores_[qid].push_back(std::move(s));
  } else {
    fail(ErrorCode::kFormat, "unknown event type " + type);
  }
  if (!from_log) append(e);
}

const quest::Questionnaire* Service::find(const std::string& id) const {
  auto it = questionnaires_.find(id);
  return it == questionnaires_.end() ? nullptr : &it->second;
}

std::string Service::new_session_id() {
  std::random_device rd;
  std::string id;
  do {
    id = fmt::format("{:08x}{:08x}{:08x}{:08x}", rd(), rd(), rd(), rd());
  } while (sessions_.count(id));
  return id;
}

json Service::session_json(const std::string& id, const Session& s) const {
  const auto& q = *find(s.questionnaire);
  json history = json::array();
  for (const auto& [node, yes] : s.history) {
    history.push_back({{"node", node}, {"question", q.questions.at(node).text}, {"answer", yes ? "yes" : "no"}});
  }
  const auto& node = q.tree.node(s.node);
  json j = {{"session_id", id},
            {"questionnaire_id", s.questionnaire},
            {"step", s.history.size()},
            {"history", history},
            {"terminal", node.is_leaf()}};
  if (node.is_leaf()) {
    j["leaf"] = s.node;
    j["probability"] = node.probability();
    j["n_condition"] = node.n_condition;
    j["n_control"] = node.n_control;
  } else {
    j["question"] = {{"node", s.node}, {"text", q.questions.at(s.node).text}};
  }
  return j;
}

Response Service::list_questionnaires() const {
  json out = json::array();
  for (const auto& [id, q] : questionnaires_) {
    out.push_back({{"id", id},
                   {"condition", q.condition},
                   {"auc", q.auc},
                   {"paths", q.paths().size()},
                   {"questions", q.questions.size()}});
  }
  return reply(200, out);
}

Response Service::get_questionnaire(const std::string& id) const {
  const auto* q = find(id);
  if (!q) return error(404, "unknown questionnaire " + id);
  return reply(200, q->to_json());
}

Response Service::create_session(const Request& r) {
  auto body = parse_body(r.body);
  if (!body || !body->contains("questionnaire_id") || !(*body)["questionnaire_id"].is_string()) {
    return error(400, "expected {\"questionnaire_id\": string}");
  }
  const auto qid = (*body)["questionnaire_id"].get<std::string>();
  if (!find(qid)) return error(404, "unknown questionnaire " + qid);
  const auto id = new_session_id();
  apply({{"type", "session_start"}, {"time", now()}, {"session", id}, {"questionnaire", qid}}, false);
  return reply(201, session_json(id, sessions_.at(id)));
}

Response Service::get_session(const std::string& id) {
  auto it = sessions_.find(id);
  if (it == sessions_.end() || now() - it->second.last_active > options_.session_ttl) {
    return error(404, "unknown session " + id);
  }
  return reply(200, session_json(id, it->second));
}

Response Service::answer(const std::string& id, const Request& r) {
  auto it = sessions_.find(id);
  if (it == sessions_.end() || now() - it->second.last_active > options_.session_ttl) {
    return error(404, "unknown session " + id);
  }
  auto body = parse_body(r.body);
  if (!body || !body->contains("answer") || !(*body)["answer"].is_string()) {
    return error(400, "expected {\"answer\": \"yes\" | \"no\"}");
  }
  const auto ans = (*body)["answer"].get<std::string>();
  if (ans != "yes" && ans != "no") return error(400, "answer must be \"yes\" or \"no\"");
  Session& s = it->second;
  if (find(s.questionnaire)->tree.node(s.node).is_leaf()) {
    return error(409, "session already finished");
  }
  if (body->contains("step")) {
    const auto& step = (*body)["step"];
    if (!step.is_number_integer()) return error(400, "step must be an integer");
    if (step.get<std::int64_t>() != static_cast<std::int64_t>(s.history.size())) {
      return error(409, fmt::format("stale step {}; session is at step {}", step.dump(), s.history.size()));
    }
  }
  apply({{"type", "answer"}, {"time", now()}, {"session", id}, {"answer", ans}}, false);
  return reply(200, session_json(id, s));
}

Response Service::get_sheet(const std::string& qid, const Request& r) const {
  const auto* q = find(qid);
  if (!q) return error(404, "unknown questionnaire " + qid);
  auto seed_it = r.query.find("seed");
  if (seed_it == r.query.end()) return error(400, "seed query parameter required");
  std::uint64_t seed = 0;
  const std::string& raw = seed_it->second;
  const bool digits = !raw.empty() && std::all_of(raw.begin(), raw.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c));
  });
  try {
    if (!digits) throw std::invalid_argument("seed");
    seed = std::stoull(raw);
  } catch (const std::exception&) {
    return error(400, "seed must be a non-negative integer");
  }
  try {
    json j = valid::generate_sheet(*q, seed).to_json(false);
    auto rater = r.query.find("rater");
    if (rater != r.query.end()) j["rater"] = rater->second;
    return reply(200, j);
  } catch (const Error& e) {
    return error(422, e.what());
  }
}

Response Service::post_score(const std::string& qid, const Request& r) {
  const auto* q = find(qid);
  if (!q) return error(404, "unknown questionnaire " + qid);
  if (!options_.rater_token.empty()) {
    const std::string* token = header(r, "X-Rater-Token");
    if (!token || *token != options_.rater_token) {
      return error(401, "rater token required");
    }
  }
  auto body = parse_body(r.body);
  if (!body) return error(400, "expected a JSON object");
  const json& b = *body;
  if (!b.contains("rater") || !b["rater"].is_string() || b["rater"].get<std::string>().empty()) {
    return error(422, "rater must be a nonempty string");
  }
  if (!b.contains("seed") || !b["seed"].is_number_unsigned()) {
    return error(422, "seed must be a non-negative integer");
  }
  if (!b.contains("item_id") || !b["item_id"].is_string()) return error(422, "item_id must be a string");
  if (!b.contains("score")) return error(422, "score is required (1-5 or \"NEI\")");
  std::string score_text;
  if (b["score"].is_number_integer()) {
    score_text = std::to_string(b["score"].get<std::int64_t>());
  } else if (b["score"].is_string()) {
    score_text = b["score"].get<std::string>();
  } else {
    return error(422, "score must be 1-5 or \"NEI\"");
  }
  valid::Score score;
  try {
    score = valid::parse_score(score_text);
  } catch (const Error& e) {
    return error(422, e.what());
  }
  std::int64_t timestamp = now();
  if (b.contains("timestamp")) {
    if (!b["timestamp"].is_number_integer()) return error(422, "timestamp must be an integer");
    timestamp = b["timestamp"].get<std::int64_t>();
  }
  const auto seed = b["seed"].get<std::uint64_t>();
  const auto item = b["item_id"].get<std::string>();
  try {
    if (!valid::generate_sheet(*q, seed).find(item)) {
      return error(422, "item " + item + " is not on the sheet for seed " + std::to_string(seed));
    }
  } catch (const Error& e) {
    return error(422, e.what());
  }
  apply({{"type", "score"},
         {"time", now()},
         {"questionnaire", qid},
         {"rater", b["rater"].get<std::string>()},
         {"seed", seed},
         {"item_id", item},
         {"score", valid::format_score(score)},
         {"timestamp", timestamp}},
        false);
  return reply(201, {{"stored", true}, {"item_id", item}, {"score", valid::format_score(score)}});
}

Response Service::get_report(const std::string& qid) const {
  const auto* q = find(qid);
  if (!q) return error(404, "unknown questionnaire " + qid);
  auto it = scores_.find(qid);
  if (it == scores_.end() || it->second.empty()) return error(422, "no scores submitted");
  std::map<std::uint64_t, valid::ScoringSheet> sheets;
  std::vector<valid::ScoreRecord> records;
  for (const auto& s : it->second) {
    if (!sheets.count(s.seed)) sheets.emplace(s.seed, valid::generate_sheet(*q, s.seed));
    records.push_back(s.record);
  }
  std::vector<valid::ScoringSheet> list;
  for (auto& [_, sh] : sheets) list.push_back(sh);
  try {
    const auto table = valid::ingest_scores(list, records);
    const auto report = valid::validation_report(*q, list, table);
    json j = report.to_json();
    j["markdown"] = report.to_markdown();
    return reply(200, j);
  } catch (const Error& e) {
    return error(422, e.what());
  }
}

Response Service::dispatch(const Request& r) {
  const auto seg = segments(r.path);
  const bool get = r.method == "GET";
  const bool post = r.method == "POST";
  if (seg.size() < 2 || seg[0] != "api") return error(404, "not found");
  auto method_error = [] { return error(405, "method not allowed"); };

  if (seg[1] == "questionnaires") {
    if (seg.size() == 2) return get ? list_questionnaires() : method_error();
    if (seg.size() == 3) return get ? get_questionnaire(seg[2]) : method_error();
  } else if (seg[1] == "sessions") {
    if (seg.size() == 2) return post ? create_session(r) : method_error();
    if (seg.size() == 3) return get ? get_session(seg[2]) : method_error();
    if (seg.size() == 4 && seg[3] == "answers") return post ? answer(seg[2], r) : method_error();
  } else if (seg[1] == "validation" && seg.size() == 4) {
    if (seg[3] == "sheet") return get ? get_sheet(seg[2], r) : method_error();
    if (seg[3] == "scores") return post ? post_score(seg[2], r) : method_error();
    if (seg[3] == "report") return get ? get_report(seg[2]) : method_error();
  }
  return error(404, "not found");
}

Response Service::handle(const Request& r) {
  Response resp;
  if (r.method == "OPTIONS") {
    resp = {204, "", {}};
  } else {
    std::lock_guard lock(mu_);
    try {
      resp = dispatch(r);
    } catch (const std::exception& e) {
      spdlog::error("{} {}: {}", r.method, r.path, e.what());
      resp = error(500, "internal error");
    }
  }
  if (!options_.cors_origin.empty()) {
    resp.headers["Access-Control-Allow-Origin"] = options_.cors_origin;
    resp.headers["Access-Control-Allow-Methods"] = "GET, POST, OPTIONS";
    resp.headers["Access-Control-Allow-Headers"] = "Content-Type, X-Rater-Token";
  }
  return resp;
}

namespace {

void forward(Service& svc, const httplib::Request& req, httplib::Response& res) {
  Request r;
  r.method = req.method;
  r.path = req.path;
  r.body = req.body;
  for (const auto& [k, v] : req.params) r.query[k] = v;
  for (const auto& [k, v] : req.headers) r.headers[k] = v;
  const Response out = svc.handle(r);
  res.status = out.status;
  for (const auto& [k, v] : out.headers) res.set_header(k, v);
  if (out.status != 204) res.set_content(out.body, "application/json");
}

}  // namespace

int Service::start(const std::string& host, int port) {
  stop();
  server_ = std::make_unique<httplib::Server>();
  auto handler = [this](const httplib::Request& req, httplib::Response& res) { forward(*this, req, res); };
  server_->Get(".*", handler);
  server_->Post(".*", handler);
  server_->Options(".*", handler);
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) {
    server_.reset();
    fail(ErrorCode::kIo, fmt::format("cannot bind {}:{}", host, port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  running_ = true;
  return bound;
}

bool Service::listen(const std::string& host, int port) {
  try {
    start(host, port);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return false;
  }
  while (running_) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  return true;
}

void Service::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
  server_.reset();
  running_ = false;
}

}  // namespace qgen::service
