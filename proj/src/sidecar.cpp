#include "scalematch/sidecar.hpp"

#include <bit>
#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <numeric>

#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "scalematch/error.hpp"

namespace scalematch {

namespace {

constexpr std::size_t kMaxLineLength = 1 << 20;

SidecarHandshake parse_handshake(const std::string& line) {
  SidecarHandshake hs;
  try {
    const auto j = nlohmann::json::parse(line);
    hs.protocol = j.at("protocol").get<int>();
    hs.model = j.at("model").get<std::string>();
    hs.layers = j.at("layers").get<std::vector<std::string>>();
    hs.resolutions = j.at("resolutions").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kProtocolError, std::string("bad handshake: ") + e.what());
  }
  if (hs.protocol != 1) {
    throw Error(ErrorCode::kProtocolError,
                "unsupported protocol version " + std::to_string(hs.protocol));
  }
  return hs;
}

}  // namespace

std::string SidecarClient::resolve_command(const std::string& default_command) {
  if (const char* env = std::getenv(kSidecarEnvVar); env != nullptr && *env != '\0') return env;
  return default_command;
}

std::shared_ptr<SidecarClient> SidecarClient::launch(const std::string& command) {
  int to_child[2];
  int from_child[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, to_child) != 0) {
    throw Error(ErrorCode::kSidecarUnavailable, std::strerror(errno));
  }
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw Error(ErrorCode::kSidecarUnavailable, std::strerror(errno));
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
    throw Error(ErrorCode::kSidecarUnavailable, std::strerror(errno));
  }
  if (pid == 0) {
    ::dup2(to_child[1], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[1]);
  ::close(from_child[1]);
  std::shared_ptr<SidecarClient> client(new SidecarClient(pid, to_child[0], from_child[0]));
  std::string line;
  try {
    line = client->read_line();
  } catch (const Error& e) {
    throw Error(ErrorCode::kSidecarUnavailable,
                "'" + command + "' exited before the handshake (" + e.what() + ")");
  }
  client->handshake_ = parse_handshake(line);
  return client;
}

SidecarClient::SidecarClient(pid_t pid, int to_child, int from_child)
    : pid_(pid), to_child_(to_child), from_child_(from_child) {}

SidecarClient::~SidecarClient() {
  ::close(to_child_);
  ::close(from_child_);
  int status = 0;
  ::waitpid(pid_, &status, 0);
}

std::string SidecarClient::read_line() {
  for (;;) {
    if (const auto pos = buffer_.find('\n'); pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      return line;
    }
    if (buffer_.size() > kMaxLineLength) {
      throw Error(ErrorCode::kProtocolError, "header line exceeds 1 MiB");
    }
    char chunk[4096];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(ErrorCode::kSidecarUnavailable, "sidecar closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void SidecarClient::read_exact(char* dst, std::size_t n) {
  const std::size_t from_buffer = std::min(n, buffer_.size());
  std::memcpy(dst, buffer_.data(), from_buffer);
  buffer_.erase(0, from_buffer);
  std::size_t got = from_buffer;
  while (got < n) {
    const ssize_t r = ::read(from_child_, dst + got, n - got);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) {
      throw Error(ErrorCode::kShapeMismatch, "payload ended after " + std::to_string(got) +
                                                 " of " + std::to_string(n) + " declared bytes");
    }
    got += static_cast<std::size_t>(r);
  }
}

void SidecarClient::write_all(const char* src, std::size_t n) {
  std::size_t sent = 0;
  while (sent < n) {
    const ssize_t w = ::send(to_child_, src + sent, n - sent, MSG_NOSIGNAL);
    if (w < 0 && errno == EINTR) continue;
    if (w <= 0) throw Error(ErrorCode::kSidecarUnavailable, "cannot write to sidecar");
    sent += static_cast<std::size_t>(w);
  }
}

Activation SidecarClient::request(const Image& crop, LayerId layer, InputResolution resolution) {
  std::lock_guard lock(mutex_);
  if (broken_) {
    throw Error(ErrorCode::kProtocolError, "connection unusable after an earlier malformed frame");
  }
  return exchange(crop, layer, resolution);
}

Activation SidecarClient::exchange(const Image& crop, LayerId layer, InputResolution resolution) {
  const long long id = next_id_++;
  const nlohmann::json header = {{"id", id},
                                 {"layer", std::string(to_string(layer))},
                                 {"resolution", resolution.side()},
                                 {"width", crop.width()},
                                 {"height", crop.height()}};
  const std::string line = header.dump() + "\n";
  const auto pixels = to_rgb8(crop);
  try {
    write_all(line.data(), line.size());
    write_all(reinterpret_cast<const char*>(pixels.data()), pixels.size());
  } catch (const Error&) {
    broken_ = true;
    throw;
  }

  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(read_line());
  } catch (const nlohmann::json::exception& e) {
    broken_ = true;
    throw Error(ErrorCode::kProtocolError, std::string("bad response header: ") + e.what());
  }
  if (!reply.is_object() || !reply.contains("id") || !reply["id"].is_number_integer() ||
      reply["id"].get<long long>() != id) {
    broken_ = true;
    throw Error(ErrorCode::kProtocolError, "response id does not match request " +
                                               std::to_string(id));
  }
  if (reply.contains("error")) {
    throw Error(ErrorCode::kProtocolError, "sidecar error: " + reply["error"].dump());
  }
  Activation act;
  try {
    act.shape = reply.at("shape").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    broken_ = true;
    throw Error(ErrorCode::kProtocolError, std::string("bad shape: ") + e.what());
  }
  if (act.shape.empty()) {
    broken_ = true;
    throw Error(ErrorCode::kProtocolError, "empty shape");
  }
  const std::size_t count =
      std::accumulate(act.shape.begin(), act.shape.end(), std::size_t{1}, std::multiplies<>());
  if (count == 0) throw Error(ErrorCode::kShapeMismatch, "shape has zero elements");

  std::vector<char> bytes(count * 4);
  try {
    read_exact(bytes.data(), bytes.size());
  } catch (const Error&) {
    broken_ = true;
    throw;
  }
  act.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto* b = reinterpret_cast<const unsigned char*>(bytes.data() + 4 * i);
    const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                               (static_cast<std::uint32_t>(b[1]) << 8) |
                               (static_cast<std::uint32_t>(b[2]) << 16) |
                               (static_cast<std::uint32_t>(b[3]) << 24);
    act.values[i] = std::bit_cast<float>(bits);
  }

  const auto key = std::make_pair(layer, resolution.side());
  if (const auto it = known_shapes_.find(key); it != known_shapes_.end()) {
    if (it->second != act.shape) {
      throw Error(ErrorCode::kShapeMismatch, "shape changed between requests for " +
                                                 std::string(to_string(layer)));
    }
  } else {
    known_shapes_.emplace(key, act.shape);
  }
  return act;
}

}  // namespace scalematch
