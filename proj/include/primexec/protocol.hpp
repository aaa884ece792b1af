#pragma once

// Executor <-> planner wire protocol. Each message is one compact JSON object followed by a
// single '\n'. The executor (client) sends a plan_request and waits for exactly one reply.

#include "primexec/episode.hpp"
#include "primexec/observation.hpp"
#include "primexec/skill.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace primexec {

inline constexpr int kProtocolVersion = 1;

struct PlanRequest {
  int protocol_version = kProtocolVersion;
  std::string task_description;
  std::optional<std::string> scene_description;
  std::vector<std::string> history;  // canonical skill strings
  Destination arm_image_position{0.5, 0.5, 1.0};
  std::vector<ObjectView> object_views;
  std::optional<std::string> image_bytes;  // base64, reserved for image-consuming planners
  std::uint64_t frame_id = 0;

  friend bool operator==(const PlanRequest&, const PlanRequest&) = default;
};

struct PlanResponse {
  int protocol_version = kProtocolVersion;
  std::string decision;  // canonical skill string, may contain `<pos>`
  std::optional<Destination> destination;
  std::optional<std::string> diagnostics;

  friend bool operator==(const PlanResponse&, const PlanResponse&) = default;
};

/// Server-side failure for one request (bad history, malformed line). The connection stays usable.
struct ErrorReply {
  int protocol_version = kProtocolVersion;
  std::string message;

  friend bool operator==(const ErrorReply&, const ErrorReply&) = default;
};

using Message = std::variant<PlanRequest, PlanResponse, ErrorReply>;

nlohmann::json message_to_json(const Message& m);
/// Throws DecodeError (offset 0 for structural problems) or VersionError.
Message message_from_json(const nlohmann::json& j);

/// One line, newline-terminated.
std::string encode_message(const Message& m);
/// Accepts the line with or without its trailing newline. Unknown fields are ignored.
Message decode_message(std::string_view line);

/// Response contract: decision parses; destination present iff the decision has an unresolved slot.
/// Returns the decision with the destination bound. Throws ProtocolError or UnresolvedPosError.
PrimitiveSkill resolve_response(const PlanResponse& response);

/// Prompt for a request using one of the bundled templates.
std::string render_prompt(const PlanRequest& request, std::string_view template_id);

// ---------------------------------------------------------------- planners

class Planner {
 public:
  virtual ~Planner() = default;
  virtual PlanResponse plan(const PlanRequest& request) = 0;
};

/// Ground-truth replay: the clip at index |history|, or "done" once the clips are exhausted.
/// Throws HistoryMismatchError unless the history is a prefix of the episode's decisions.
PlanResponse oracle_plan(const Episode& episode, const PlanRequest& request);

class OraclePlanner final : public Planner {
 public:
  explicit OraclePlanner(Episode episode) : episode_(std::move(episode)) {}
  PlanResponse plan(const PlanRequest& request) override { return oracle_plan(episode_, request); }
  const Episode& episode() const noexcept { return episode_; }

 private:
  Episode episode_;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::string to_string() const;
};

/// "host:port" or ":port". Throws Error on malformed input.
Endpoint parse_endpoint(std::string_view text);

/// Buffered newline framing over a connected stream socket. Move-only; closes on destruction.
class LineChannel {
 public:
  explicit LineChannel(int fd) noexcept : fd_(fd) {}
  LineChannel(LineChannel&& other) noexcept;
  LineChannel& operator=(LineChannel&& other) noexcept;
  LineChannel(const LineChannel&) = delete;
  LineChannel& operator=(const LineChannel&) = delete;
  ~LineChannel();

  static LineChannel connect(const Endpoint& endpoint);

  /// Next line without its newline; nullopt on clean EOF at a line boundary.
  /// Throws TransportError on I/O errors, a truncated final line, or lines over `max_length`.
  std::optional<std::string> read_line(std::size_t max_length = 1 << 20);
  void write(std::string_view bytes);
  void close() noexcept;
  int fd() const noexcept { return fd_; }

 private:
  int fd_ = -1;
  std::string buffer_;
};

/// Client side of the protocol: one connection, strict request/response alternation.
class EndpointPlanner final : public Planner {
 public:
  explicit EndpointPlanner(Endpoint endpoint) : endpoint_(std::move(endpoint)) {}
  PlanResponse plan(const PlanRequest& request) override;

 private:
  Endpoint endpoint_;
  std::optional<LineChannel> channel_;
};

// ---------------------------------------------------------------- oracle service

/// Stateless request handler over an episode corpus. The episode is chosen by task_description.
class OracleService {
 public:
  explicit OracleService(std::vector<Episode> corpus);

  PlanResponse handle(const PlanRequest& request) const;
  /// Full line-level handling: never throws for bad input, answers with an ErrorReply instead.
  std::string handle_line(std::string_view line) const;

 private:
  std::vector<Episode> corpus_;
};

/// TCP server for an OracleService, one thread per connection.
class OracleServer {
 public:
  OracleServer(std::vector<Episode> corpus, const Endpoint& bind);
  ~OracleServer();
  OracleServer(const OracleServer&) = delete;
  OracleServer& operator=(const OracleServer&) = delete;

  /// The bound endpoint (with the actual port when binding port 0).
  const Endpoint& endpoint() const noexcept;
  std::size_t connections_served() const noexcept;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<OracleServer> serve_oracle(std::vector<Episode> corpus, const Endpoint& bind);

}  // namespace primexec
