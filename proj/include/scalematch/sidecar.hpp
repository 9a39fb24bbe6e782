#pragma once

#include <map>
#include <mutex>
#include <string>
#include <sys/types.h>
#include <utility>
#include <vector>

#include "scalematch/descriptors.hpp"
#include "scalematch/image.hpp"

namespace scalematch {

/// Environment variable that overrides the sidecar launch command.
inline constexpr const char* kSidecarEnvVar = "SCALEMATCH_SIDECAR";

struct SidecarHandshake {
  int protocol = 0;
  std::string model;
  std::vector<std::string> layers;
  std::vector<int> resolutions;
};

/// Raw activation tensor returned by the sidecar.
struct Activation {
  std::vector<std::size_t> shape;
  std::vector<float> values;
};

/// Client for the descriptor sidecar speaking the line-JSON + binary payload
/// protocol over its stdin/stdout. Requests on one client are serialized.
///
/// Wire format:
///   handshake  <- {"protocol":1,"model":...,"layers":[...],"resolutions":[...]}\n
///   request    -> {"id":N,"layer":"res5c","resolution":224,"width":W,"height":H}\n + W*H*3 RGB bytes
///   response   <- {"id":N,"shape":[...]}\n + prod(shape)*4 bytes of little-endian float32
///   error      <- {"id":N,"error":"..."}\n
class SidecarClient {
 public:
  /// Spawns `/bin/sh -c command` and reads the handshake. Throws
  /// Error(kSidecarUnavailable) if the process cannot be started or closes
  /// before the handshake, Error(kProtocolError) on a malformed handshake.
  static std::shared_ptr<SidecarClient> launch(const std::string& command);

  /// Uses $SCALEMATCH_SIDECAR when set, otherwise `default_command`.
  static std::string resolve_command(const std::string& default_command);

  ~SidecarClient();
  SidecarClient(const SidecarClient&) = delete;
  SidecarClient& operator=(const SidecarClient&) = delete;

  const SidecarHandshake& handshake() const noexcept { return handshake_; }

  /// Sends one crop and waits for its activation tensor. Error responses and
  /// malformed frames throw Error(kProtocolError); a payload that disagrees
  /// with the declared shape, or a shape that changes between requests for
  /// the same (layer, resolution), throws Error(kShapeMismatch). After a
  /// malformed frame the stream cannot be resynchronized, and every later
  /// request throws Error(kProtocolError).
  Activation request(const Image& crop, LayerId layer, InputResolution resolution);

 private:
  Activation exchange(const Image& crop, LayerId layer, InputResolution resolution);
  SidecarClient(pid_t pid, int to_child, int from_child);
  std::string read_line();
  void read_exact(char* dst, std::size_t n);
  void write_all(const char* src, std::size_t n);

  pid_t pid_;
  int to_child_;
  int from_child_;
  std::string buffer_;
  SidecarHandshake handshake_;
  long long next_id_ = 0;
  bool broken_ = false;
  std::map<std::pair<LayerId, int>, std::vector<std::size_t>> known_shapes_;
  std::mutex mutex_;
};

}  // namespace scalematch
