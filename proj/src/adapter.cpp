#include "cyclesql/adapter.hpp"

#include <iostream>
#include <set>

#include "cyclesql/builtin_adapters.hpp"
#include "cyclesql/corpus.hpp"
#include "cyclesql/error.hpp"

namespace cyclesql {

namespace {

std::optional<std::string> optional_string(const nlohmann::json& params, const char* field) {
   auto it = params.find(field);
   if (it == params.end() || it->is_null()) return std::nullopt;
   return it->get<std::string>();
}

} // namespace

nlohmann::json GenerateRequest::to_json() const {
   nlohmann::json j = {{"query", query}, {"db_id", db_id}, {"schema", schema}};
   j["prev_query"] = prev_query ? nlohmann::json(*prev_query) : nlohmann::json(nullptr);
   return j;
}

GenerateRequest GenerateRequest::from_json(const nlohmann::json& params) {
   try {
      return {params.at("query").get<std::string>(), params.value("db_id", ""), params.value("schema", nlohmann::json::object()),
              optional_string(params, "prev_query")};
   } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Protocol, std::string("malformed generate params: ") + e.what());
   }
}

nlohmann::json ParseRequest::to_json() const {
   nlohmann::json j = {{"utterance", utterance}, {"db_id", db_id}, {"schema", schema}};
   j["prev_query"] = prev_query ? nlohmann::json(*prev_query) : nlohmann::json(nullptr);
   j["input"] = TurnContext{prev_query, utterance}.rendered_input();
   return j;
}

ParseRequest ParseRequest::from_json(const nlohmann::json& params) {
   try {
      return {params.at("utterance").get<std::string>(), params.value("db_id", ""),
              params.value("schema", nlohmann::json::object()), optional_string(params, "prev_query")};
   } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Protocol, std::string("malformed parse params: ") + e.what());
   }
}

SubprocessAdapter::SubprocessAdapter(std::string command, AdapterOptions options)
    : command_(std::move(command)), options_(options), child_(command_) {
   std::optional<std::string> line;
   try {
      line = child_.read_line(options_.timeout);
   } catch (const Error& e) {
      throw Error(ErrorKind::Adapter, "adapter '" + command_ + "' sent no handshake: " + e.what());
   }
   if (!line) throw Error(ErrorKind::Adapter, "adapter '" + command_ + "' exited before its handshake");
   nlohmann::json hello = nlohmann::json::parse(*line, nullptr, false);
   if (!hello.is_object() || hello.value("protocol", "") != kAdapterProtocol || !hello.contains("concurrent") ||
       !hello["concurrent"].is_boolean())
      throw Error(ErrorKind::Protocol, "adapter '" + command_ + "' sent an invalid handshake: " + *line);
   concurrent_ = hello["concurrent"].get<bool>();
   reader_ = std::thread([this] { read_loop(); });
}

SubprocessAdapter::~SubprocessAdapter() {
   child_.terminate(std::chrono::milliseconds(1000));
   if (reader_.joinable()) reader_.join();
}

void SubprocessAdapter::fail_pending(ErrorKind kind, const std::string& message) {
   std::lock_guard lock(pending_mutex_);
   closed_ = true;
   close_reason_ = message;
   for (auto& [id, promise] : pending_) promise.set_exception(std::make_exception_ptr(Error(kind, message)));
   pending_.clear();
}

void SubprocessAdapter::read_loop() {
   try {
      while (auto line = child_.read_line()) {
         if (line->empty()) continue;
         nlohmann::json msg = nlohmann::json::parse(*line, nullptr, false);
         if (!msg.is_object() || !msg.contains("id") || !msg["id"].is_number_integer()) {
            fail_pending(ErrorKind::Protocol, "adapter '" + command_ + "' sent an unroutable line: " + *line);
            continue;
         }
         std::lock_guard lock(pending_mutex_);
         auto it = pending_.find(msg["id"].get<std::int64_t>());
         if (it == pending_.end()) continue;
         if (msg.contains("error"))
            it->second.set_exception(std::make_exception_ptr(
               Error(ErrorKind::Adapter, msg["error"].is_string() ? msg["error"].get<std::string>() : msg["error"].dump())));
         else if (msg.contains("result"))
            it->second.set_value(msg["result"]);
         else
            it->second.set_exception(std::make_exception_ptr(Error(ErrorKind::Protocol, "response without result or error")));
         pending_.erase(it);
      }
      fail_pending(ErrorKind::Adapter, "adapter '" + command_ + "' exited");
   } catch (const std::exception& e) {
      fail_pending(ErrorKind::Adapter, std::string("adapter stream failed: ") + e.what());
   }
}

nlohmann::json SubprocessAdapter::call(std::string_view method, const nlohmann::json& params) {
   std::unique_lock<std::mutex> serial;
   if (!concurrent_) serial = std::unique_lock(serial_mutex_);
   const std::int64_t id = next_id_++;
   std::future<nlohmann::json> result;
   {
      std::lock_guard lock(pending_mutex_);
      if (closed_) throw Error(ErrorKind::Adapter, close_reason_);
      result = pending_[id].get_future();
   }
   const nlohmann::json request = {{"id", id}, {"method", method}, {"params", params}};
   try {
      std::lock_guard lock(write_mutex_);
      child_.write(request.dump() + "\n");
   } catch (const Error&) {
      std::lock_guard lock(pending_mutex_);
      pending_.erase(id);
      throw;
   }
   if (result.wait_for(options_.timeout) != std::future_status::ready) {
      std::lock_guard lock(pending_mutex_);
      pending_.erase(id);
      throw Error(ErrorKind::Adapter, "adapter '" + command_ + "' timed out on request " + std::to_string(id));
   }
   return result.get();
}

std::string SubprocessAdapter::generate(const GenerateRequest& request) {
   const nlohmann::json result = call("generate", request.to_json());
   if (!result.is_object() || !result.contains("utterance") || !result["utterance"].is_string())
      throw Error(ErrorKind::Protocol, "generate result lacks a string utterance: " + result.dump());
   return result["utterance"].get<std::string>();
}

std::string SubprocessAdapter::parse(const ParseRequest& request) {
   const nlohmann::json result = call("parse", request.to_json());
   if (!result.is_object() || !result.contains("query") || !result["query"].is_string())
      throw Error(ErrorKind::Protocol, "parse result lacks a string query: " + result.dump());
   return result["query"].get<std::string>();
}

std::unique_ptr<ModelAdapter> make_adapter(std::string_view spec, const AdapterOptions& options) {
   if (spec.starts_with("builtin:")) return make_builtin(spec.substr(8), options);
   if (spec.starts_with("cmd:")) return std::make_unique<SubprocessAdapter>(std::string(spec.substr(4)), options);
   throw Error(ErrorKind::Adapter, "adapter spec '" + std::string(spec) + "' must start with builtin: or cmd:");
}

std::string generate_utterance(ModelAdapter& model, const SqlAst& q, const DatabaseEnv& env, const SqlAst* prev) {
   GenerateRequest request{render(q, env), env.db_id, schema_to_json(env), std::nullopt};
   if (prev) request.prev_query = render(*prev, env);
   std::string utterance = model.generate(request);
   if (utterance.empty()) throw Error(ErrorKind::Protocol, "adapter '" + model.name() + "' returned an empty utterance");
   return utterance;
}

std::string predict_sql(ModelAdapter& model, const std::string& utterance, const DatabaseEnv& env, const SqlAst* prev) {
   ParseRequest request{utterance, env.db_id, schema_to_json(env), std::nullopt};
   if (prev) request.prev_query = render(*prev, env);
   return model.parse(request);
}

SqlAst parse_utterance(ModelAdapter& model, const std::string& utterance, const DatabaseEnv& env, const SqlAst* prev) {
   const std::string sql = predict_sql(model, utterance, env, prev);
   try {
      return parse_sql(sql, env);
   } catch (const Error& e) {
      throw Error(ErrorKind::InvalidPrediction, "prediction '" + sql + "' is not usable: " + e.what());
   }
}

void serve_adapter(std::istream& in, std::ostream& out, ModelAdapter& model, std::ostream& log) {
   out << nlohmann::json{{"protocol", kAdapterProtocol}, {"concurrent", false}}.dump() << '\n' << std::flush;
   std::string line;
   while (std::getline(in, line)) {
      if (line.empty()) continue;
      const nlohmann::json request = nlohmann::json::parse(line, nullptr, false);
      if (!request.is_object() || !request.contains("id")) {
         log << "skipping malformed request line: " << line << '\n';
         continue;
      }
      nlohmann::json response = {{"id", request["id"]}};
      const std::string method = request.value("method", "");
      const nlohmann::json params = request.value("params", nlohmann::json::object());
      try {
         if (method == "generate") response["result"] = {{"utterance", model.generate(GenerateRequest::from_json(params))}};
         else if (method == "parse") response["result"] = {{"query", model.parse(ParseRequest::from_json(params))}};
         else response["error"] = "unknown method";
      } catch (const std::exception& e) {
         response["error"] = e.what();
      }
      out << response.dump() << '\n' << std::flush;
   }
}

ConformanceReport check_conformance(const std::string& command, const DatabaseEnv& env, std::chrono::milliseconds timeout) {
   ConformanceReport report;
   auto fail = [&](std::string what) { report.failures.push_back(std::move(what)); };
   if (env.tables.empty() || env.tables.front().columns.empty()) {
      fail("conformance needs a database with at least one column");
      return report;
   }
   try {
      ChildProcess child(command);
      const auto hello_line = child.read_line(timeout);
      if (!hello_line) {
         fail("no handshake line");
         return report;
      }
      const nlohmann::json hello = nlohmann::json::parse(*hello_line, nullptr, false);
      if (!hello.is_object() || hello.size() != 2 || hello.value("protocol", "") != kAdapterProtocol ||
          !hello.contains("concurrent") || !hello["concurrent"].is_boolean())
         fail("handshake must be exactly {\"protocol\": \"gazp-adapter/1\", \"concurrent\": bool}, got " + *hello_line);

      const auto& table = env.tables.front();
      const std::vector<std::string> queries = {
         render(parse_sql("select count ( * ) from " + table.name, env), env),
         render(parse_sql("select " + table.columns.front().name + " from " + table.name, env), env)};
      const nlohmann::json schema = schema_to_json(env);

      // Sends requests and collects exactly one response per id.
      auto exchange = [&](const std::vector<nlohmann::json>& requests, bool with_garbage) {
         std::map<std::int64_t, nlohmann::json> responses;
         std::string batch;
         for (std::size_t i = 0; i < requests.size(); ++i) {
            if (with_garbage && i == 1) batch += "this is not json\n";
            batch += requests[i].dump() + "\n";
         }
         child.write(batch);
         std::set<std::int64_t> expected;
         for (const auto& r : requests) expected.insert(r["id"].get<std::int64_t>());
         while (responses.size() < expected.size()) {
            const auto line = child.read_line(timeout);
            if (!line) {
               fail("adapter closed its output with " + std::to_string(expected.size() - responses.size()) + " responses missing");
               break;
            }
            const nlohmann::json msg = nlohmann::json::parse(*line, nullptr, false);
            if (!msg.is_object() || !msg.contains("id") || !msg["id"].is_number_integer()) {
               fail("unroutable response line: " + *line);
               continue;
            }
            const auto id = msg["id"].get<std::int64_t>();
            if (!expected.contains(id)) fail("response for unknown id " + std::to_string(id));
            else if (!responses.emplace(id, msg).second) fail("second response for id " + std::to_string(id));
            if (msg.contains("result") == msg.contains("error")) fail("response " + std::to_string(id) + " needs exactly one of result/error");
         }
         return responses;
      };

      std::vector<nlohmann::json> first = {
         {{"id", 1}, {"method", "generate"}, {"params", GenerateRequest{queries[0], env.db_id, schema, std::nullopt}.to_json()}},
         {{"id", 2}, {"method", "frobnicate"}, {"params", nlohmann::json::object()}},
         {{"id", 3}, {"method", "generate"}, {"params", GenerateRequest{queries[1], env.db_id, schema, queries[0]}.to_json()}},
      };
      auto responses = exchange(first, true);
      if (responses.contains(2) && !responses[2].contains("error")) fail("unknown method must yield an error response");
      std::vector<std::string> utterances;
      for (std::int64_t id : {1, 3}) {
         if (!responses.contains(id)) continue;
         const auto& r = responses[id];
         if (!r.contains("result") || !r["result"].is_object() || !r["result"].contains("utterance") ||
             !r["result"]["utterance"].is_string() || r["result"]["utterance"].get<std::string>().empty())
            fail("generate response " + std::to_string(id) + " lacks a non-empty utterance");
         else
            utterances.push_back(r["result"]["utterance"].get<std::string>());
      }

      std::vector<nlohmann::json> second;
      for (std::size_t i = 0; i < utterances.size(); ++i)
         second.push_back({{"id", 10 + static_cast<std::int64_t>(i)},
                           {"method", "parse"},
                           {"params", ParseRequest{utterances[i], env.db_id, schema, std::nullopt}.to_json()}});
      if (!second.empty()) {
         auto parsed = exchange(second, false);
         for (auto& [id, r] : parsed)
            if (!r.contains("result") || !r["result"].is_object() || !r["result"].contains("query") || !r["result"]["query"].is_string())
               fail("parse response " + std::to_string(id) + " lacks a string query");
      }

      child.close_stdin();
      if (const auto extra = child.read_line(timeout)) fail("unsolicited output after the last request: " + *extra);
      child.terminate(timeout);
   } catch (const std::exception& e) {
      fail(e.what());
   }
   report.passed = report.failures.empty();
   return report;
}

} // namespace cyclesql
