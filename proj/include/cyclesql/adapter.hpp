#pragma once

#include <atomic>
#include <chrono>
#include <future>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cyclesql/canon.hpp"
#include "cyclesql/error.hpp"
#include "cyclesql/schema.hpp"
#include "cyclesql/subprocess.hpp"

namespace cyclesql {

inline constexpr std::string_view kAdapterProtocol = "gazp-adapter/1";
inline constexpr std::chrono::milliseconds kAdapterTimeout{30000};

struct GenerateRequest {
   /// Canonical SQL.
   std::string query;
   std::string db_id;
   /// Single-database slice in the schema-file layout.
   nlohmann::json schema;
   std::optional<std::string> prev_query;

   nlohmann::json to_json() const;
   static GenerateRequest from_json(const nlohmann::json& params);
};

struct ParseRequest {
   std::string utterance;
   std::string db_id;
   nlohmann::json schema;
   std::optional<std::string> prev_query;

   /// Adds "input": the TurnContext rendering of utterance and prev_query.
   nlohmann::json to_json() const;
   static ParseRequest from_json(const nlohmann::json& params);
};

/// A backward generator G and/or forward parser F.
class ModelAdapter {
   public:
   virtual ~ModelAdapter() = default;
   /// Utterance for a query. Errors: Adapter, Protocol.
   virtual std::string generate(const GenerateRequest& request) = 0;
   /// SQL text for an utterance. Errors: Adapter, Protocol.
   virtual std::string parse(const ParseRequest& request) = 0;
   /// Whether calls may be issued from several threads at once.
   virtual bool concurrent() const = 0;
   virtual std::string name() const = 0;
};

struct AdapterOptions {
   std::chrono::milliseconds timeout = kAdapterTimeout;
   /// Seeds the randomized builtin baselines.
   std::uint64_t seed = 0;
};

/// JSON-lines client for an adapter subprocess. Reads the handshake on
/// construction; requests are serialized unless the handshake advertises
/// "concurrent": true. A dead or misbehaving child fails requests, never the
/// caller's process.
class SubprocessAdapter final : public ModelAdapter {
   public:
   SubprocessAdapter(std::string command, AdapterOptions options = {});
   ~SubprocessAdapter() override;

   std::string generate(const GenerateRequest& request) override;
   std::string parse(const ParseRequest& request) override;
   bool concurrent() const override { return concurrent_; }
   std::string name() const override { return "cmd:" + command_; }

   /// Sends one request and waits for its result object.
   nlohmann::json call(std::string_view method, const nlohmann::json& params);

   private:
   void read_loop();
   void fail_pending(ErrorKind kind, const std::string& message);

   std::string command_;
   AdapterOptions options_;
   ChildProcess child_;
   bool concurrent_ = false;
   std::thread reader_;
   std::mutex write_mutex_;
   std::mutex serial_mutex_;
   std::mutex pending_mutex_;
   std::map<std::int64_t, std::promise<nlohmann::json>> pending_;
   std::atomic<std::int64_t> next_id_{1};
   bool closed_ = false;
   std::string close_reason_;
};

/// "builtin:<perfect|corrupting|lossy>" or "cmd:<shell command>".
std::unique_ptr<ModelAdapter> make_adapter(std::string_view spec, const AdapterOptions& options = {});

/// G(q, e): renders q canonically and asks the adapter. Errors: Adapter,
/// Protocol (including an empty utterance).
std::string generate_utterance(ModelAdapter& model, const SqlAst& q, const DatabaseEnv& env, const SqlAst* prev = nullptr);

/// F(u, e) as raw SQL text. Errors: Adapter, Protocol.
std::string predict_sql(ModelAdapter& model, const std::string& utterance, const DatabaseEnv& env,
                        const SqlAst* prev = nullptr);

/// F(u, e) parsed against env. Errors: InvalidPrediction when the adapter's
/// SQL is outside the subset or does not resolve.
SqlAst parse_utterance(ModelAdapter& model, const std::string& utterance, const DatabaseEnv& env,
                       const SqlAst* prev = nullptr);

/// Answers protocol requests from `in` with `model` until end of input.
/// Writes the handshake first. Lines that are not JSON objects with an id are
/// reported on `log` and skipped.
void serve_adapter(std::istream& in, std::ostream& out, ModelAdapter& model, std::ostream& log);

struct ConformanceReport {
   bool passed = false;
   std::vector<std::string> failures;
};

/// Wire-level checks against an adapter command: exact handshake fields,
/// one response per request id with matching ids (including unknown methods),
/// non-empty utterances and string queries from parse.
ConformanceReport check_conformance(const std::string& command, const DatabaseEnv& env,
                                    std::chrono::milliseconds timeout = kAdapterTimeout);

} // namespace cyclesql
