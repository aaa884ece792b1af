#include "primexec/protocol.hpp"

#include "primexec/errors.hpp"
#include "primexec/json_util.hpp"
#include "primexec/prompts.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <mutex>
#include <thread>

namespace primexec {

using nlohmann::json;

// ---------------------------------------------------------------- codec

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

json view_to_json(const ObjectView& v) {
  return json{{"id", v.id},
              {"category", v.category},
              {"attributes", v.attributes},
              {"image_position", to_json(v.image_position)}};
}

ObjectView view_from_json(const json& j, const std::string& path) {
  ObjectView v{jsonutil::get_string(j, path, "id"), jsonutil::get_string(j, path, "category"), {},
               destination_from_json(jsonutil::get(j, path, "image_position"), path + "/image_position")};
  const json& attrs = jsonutil::get_array(j, path, "attributes");
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    if (!attrs[i].is_string()) throw SchemaError(fmt::format("{}/attributes/{}", path, i), "expected a string");
    v.attributes.push_back(attrs[i].get<std::string>());
  }
  return v;
}

}  // namespace

json message_to_json(const Message& m) {
  return std::visit(
      Overloaded{
          [](const PlanRequest& r) {
            json views = json::array();
            for (const auto& v : r.object_views) views.push_back(view_to_json(v));
            json j{{"type", "plan_request"},
                   {"protocol_version", r.protocol_version},
                   {"task_description", r.task_description},
                   {"history", r.history},
                   {"arm_image_position", to_json(r.arm_image_position)},
                   {"object_views", std::move(views)},
                   {"frame_id", r.frame_id}};
            if (r.scene_description) j["scene_description"] = *r.scene_description;
            if (r.image_bytes) j["image_bytes"] = *r.image_bytes;
            return j;
          },
          [](const PlanResponse& r) {
            json j{{"type", "plan_response"}, {"protocol_version", r.protocol_version}, {"decision", r.decision}};
            if (r.destination) j["destination"] = to_json(*r.destination);
            if (r.diagnostics) j["diagnostics"] = *r.diagnostics;
            return j;
          },
          [](const ErrorReply& e) {
            return json{{"type", "error"}, {"protocol_version", e.protocol_version}, {"message", e.message}};
          },
      },
      m);
}

Message message_from_json(const json& j) {
  if (!j.is_object()) throw DecodeError(0, "message must be a JSON object");
  auto version = j.find("protocol_version");
  if (version == j.end()) throw DecodeError(0, "missing protocol_version");
  if (!version->is_number_integer()) throw DecodeError(0, "protocol_version must be an integer");
  if (version->get<long long>() != kProtocolVersion) {
    throw VersionError(fmt::format("unsupported protocol_version {} (expected {})", version->dump(), kProtocolVersion));
  }
  try {
    const std::string type = jsonutil::get_string(j, "", "type");
    if (type == "plan_request") {
      PlanRequest r;
      r.task_description = jsonutil::get_string(j, "", "task_description");
      r.scene_description = jsonutil::get_optional_string(j, "", "scene_description");
      const json& history = jsonutil::get_array(j, "", "history");
      for (std::size_t i = 0; i < history.size(); ++i) {
        if (!history[i].is_string()) throw SchemaError(fmt::format("/history/{}", i), "expected a string");
        r.history.push_back(history[i].get<std::string>());
      }
      r.arm_image_position = destination_from_json(jsonutil::get(j, "", "arm_image_position"), "/arm_image_position");
      const json& views = jsonutil::get_array(j, "", "object_views");
      for (std::size_t i = 0; i < views.size(); ++i) {
        r.object_views.push_back(view_from_json(views[i], fmt::format("/object_views/{}", i)));
      }
      r.image_bytes = jsonutil::get_optional_string(j, "", "image_bytes");
      r.frame_id = jsonutil::get_index(j, "", "frame_id");
      return r;
    }
    if (type == "plan_response") {
      PlanResponse r;
      r.decision = jsonutil::get_string(j, "", "decision");
      if (auto d = j.find("destination"); d != j.end() && !d->is_null()) {
        r.destination = destination_from_json(*d, "/destination");
      }
      r.diagnostics = jsonutil::get_optional_string(j, "", "diagnostics");
      return r;
    }
    if (type == "error") return ErrorReply{kProtocolVersion, jsonutil::get_string(j, "", "message")};
    throw SchemaError("/type", "unknown message type '" + type + "'");
  } catch (const SchemaError& e) {
    throw DecodeError(0, e.what());
  }
}

std::string encode_message(const Message& m) { return message_to_json(m).dump() + "\n"; }

Message decode_message(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (line.find('\n') != std::string_view::npos) throw DecodeError(line.find('\n'), "embedded newline");
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DecodeError(e.byte > 0 ? e.byte - 1 : 0, e.what());
  }
  return message_from_json(j);
}

PrimitiveSkill resolve_response(const PlanResponse& response) {
  PrimitiveSkill skill;
  try {
    skill = parse_skill(response.decision);
  } catch (const Error& e) {
    throw ProtocolError(fmt::format("planner decision '{}' is not a valid skill: {}", response.decision, e.what()));
  }
  if (skill.needs_destination()) {
    if (!response.destination) {
      throw UnresolvedPosError(fmt::format("decision '{}' contains <pos> but no destination", response.decision));
    }
    return bind_destination(skill, *response.destination);
  }
  if (response.destination) {
    throw ProtocolError(fmt::format("destination supplied for decision '{}' without <pos>", response.decision));
  }
  return skill;
}

std::string render_prompt(const PlanRequest& request, std::string_view template_id) {
  return render_template(template_id, PromptFields{request.task_description, request.history,
                                                   request.arm_image_position, request.scene_description});
}

// ---------------------------------------------------------------- oracle

PlanResponse oracle_plan(const Episode& episode, const PlanRequest& request) {
  const auto& h = request.history;
  if (h.size() > episode.clips.size()) {
    throw HistoryMismatchError(fmt::format("history has {} decisions but episode '{}' has only {} clips", h.size(),
                                           episode.id, episode.clips.size()));
  }
  for (std::size_t i = 0; i < h.size(); ++i) {
    const std::string expected = format_skill(episode.clips[i].skill);
    if (h[i] != expected) {
      throw HistoryMismatchError(
          fmt::format("history[{}] is '{}' but episode '{}' expects '{}'", i, h[i], episode.id, expected));
    }
  }
  if (h.size() == episode.clips.size()) return PlanResponse{kProtocolVersion, "done", std::nullopt, std::nullopt};
  const Clip& clip = episode.clips[h.size()];
  PlanResponse r{kProtocolVersion, format_skill(clip.skill), std::nullopt, std::nullopt};
  if (clip.skill.needs_destination()) r.destination = clip.spatial.value().destination;
  return r;
}

OracleService::OracleService(std::vector<Episode> corpus) : corpus_(std::move(corpus)) {
  std::sort(corpus_.begin(), corpus_.end(), [](const Episode& a, const Episode& b) { return a.id < b.id; });
}

PlanResponse OracleService::handle(const PlanRequest& request) const {
  for (const auto& ep : corpus_) {
    if (ep.task_description == request.task_description) return oracle_plan(ep, request);
  }
  throw HistoryMismatchError("no episode for task description '" + request.task_description + "'");
}

std::string OracleService::handle_line(std::string_view line) const {
  try {
    Message m = decode_message(line);
    const auto* request = std::get_if<PlanRequest>(&m);
    if (!request) return encode_message(ErrorReply{kProtocolVersion, "expected a plan_request"});
    return encode_message(handle(*request));
  } catch (const Error& e) {
    return encode_message(ErrorReply{kProtocolVersion, e.what()});
  }
}

// ---------------------------------------------------------------- transport

std::string Endpoint::to_string() const { return fmt::format("{}:{}", host, port); }

Endpoint parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) throw Error("endpoint must be host:port, got '" + std::string(text) + "'");
  Endpoint e;
  if (colon > 0) e.host = std::string(text.substr(0, colon));
  const std::string_view port = text.substr(colon + 1);
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (ec != std::errc() || ptr != port.data() + port.size() || value > 65535) {
    throw Error("invalid port in endpoint '" + std::string(text) + "'");
  }
  e.port = static_cast<std::uint16_t>(value);
  return e;
}

namespace {

sockaddr_in resolve(const Endpoint& e) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(e.port);
  if (inet_pton(AF_INET, e.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(e.host.c_str(), nullptr, &hints, &res) != 0 || !res) {
    throw TransportError("cannot resolve host '" + e.host + "'");
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

std::string errno_text(const char* what) { return fmt::format("{}: {}", what, std::strerror(errno)); }

}  // namespace

LineChannel::LineChannel(LineChannel&& other) noexcept : fd_(other.fd_), buffer_(std::move(other.buffer_)) {
  other.fd_ = -1;
}

LineChannel& LineChannel::operator=(LineChannel&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    buffer_ = std::move(other.buffer_);
    other.fd_ = -1;
  }
  return *this;
}

LineChannel::~LineChannel() { close(); }

void LineChannel::close() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

LineChannel LineChannel::connect(const Endpoint& endpoint) {
  const sockaddr_in addr = resolve(endpoint);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TransportError(errno_text("socket"));
  LineChannel ch(fd);
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    throw TransportError(errno_text(("connect to " + endpoint.to_string()).c_str()));
  }
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return ch;
}

std::optional<std::string> LineChannel::read_line(std::size_t max_length) {
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    if (buffer_.size() > max_length) throw TransportError("line exceeds maximum length");
    char chunk[4096];
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("recv"));
    }
    if (n == 0) {
      if (buffer_.empty()) return std::nullopt;
      throw TransportError("connection closed in the middle of a line");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void LineChannel::write(std::string_view bytes) {
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("send"));
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

PlanResponse EndpointPlanner::plan(const PlanRequest& request) {
  if (!channel_) channel_ = LineChannel::connect(endpoint_);
  try {
    channel_->write(encode_message(request));
    auto line = channel_->read_line();
    if (!line) throw TransportError("planner closed the connection");
    Message reply;
    try {
      reply = decode_message(*line);
    } catch (const Error& e) {
      throw ProtocolError(std::string("undecodable planner reply: ") + e.what());
    }
    if (auto* r = std::get_if<PlanResponse>(&reply)) return *r;
    if (auto* e = std::get_if<ErrorReply>(&reply)) throw ProtocolError("planner error: " + e->message);
    throw ProtocolError("planner replied with a request message");
  } catch (const TransportError&) {
    channel_.reset();
    throw;
  }
}

// ---------------------------------------------------------------- server

struct OracleServer::Impl {
  OracleService service;
  Endpoint bound;
  int listen_fd = -1;
  std::atomic<bool> stopping{false};
  std::atomic<std::size_t> served{0};
  std::mutex mutex;
  std::vector<std::thread> workers;
  std::vector<int> open_fds;
  std::thread acceptor;

  explicit Impl(std::vector<Episode> corpus) : service(std::move(corpus)) {}

  void serve(int fd) {
    LineChannel ch(fd);
    try {
      while (auto line = ch.read_line()) ch.write(service.handle_line(*line));
    } catch (const TransportError&) {
      // client vanished mid-line or the server is stopping; only this connection ends
    }
    {
      std::lock_guard lock(mutex);
      std::erase(open_fds, fd);
    }
    ++served;
  }

  void accept_loop() {
    while (!stopping) {
      const int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) {
        if (stopping) break;
        if (errno == EINTR || errno == ECONNABORTED) continue;
        break;
      }
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      std::lock_guard lock(mutex);
      if (stopping) {
        ::close(fd);
        break;
      }
      open_fds.push_back(fd);
      workers.emplace_back([this, fd] { serve(fd); });
    }
  }
};

OracleServer::OracleServer(std::vector<Episode> corpus, const Endpoint& bind)
    : impl_(std::make_unique<Impl>(std::move(corpus))) {
  sockaddr_in addr = resolve(bind);
  impl_->listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (impl_->listen_fd < 0) throw TransportError(errno_text("socket"));
  const int one = 1;
  ::setsockopt(impl_->listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(impl_->listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(impl_->listen_fd, 64) != 0) {
    const std::string msg = errno_text(("bind " + bind.to_string()).c_str());
    ::close(impl_->listen_fd);
    throw TransportError(msg);
  }
  socklen_t len = sizeof addr;
  ::getsockname(impl_->listen_fd, reinterpret_cast<sockaddr*>(&addr), &len);
  impl_->bound = Endpoint{bind.host, ntohs(addr.sin_port)};
  impl_->acceptor = std::thread([this] { impl_->accept_loop(); });
}

OracleServer::~OracleServer() { stop(); }

const Endpoint& OracleServer::endpoint() const noexcept { return impl_->bound; }

std::size_t OracleServer::connections_served() const noexcept { return impl_->served; }

void OracleServer::stop() {
  if (!impl_ || impl_->stopping.exchange(true)) return;
  ::shutdown(impl_->listen_fd, SHUT_RDWR);
  ::close(impl_->listen_fd);
  if (impl_->acceptor.joinable()) impl_->acceptor.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(impl_->mutex);
    for (int fd : impl_->open_fds) ::shutdown(fd, SHUT_RDWR);
    workers.swap(impl_->workers);
  }
  for (auto& t : workers) t.join();
}

std::unique_ptr<OracleServer> serve_oracle(std::vector<Episode> corpus, const Endpoint& bind) {
  return std::make_unique<OracleServer>(std::move(corpus), bind);
}

}  // namespace primexec
