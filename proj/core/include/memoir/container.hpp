#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace memoir {

/// Version mismatch, truncation or any other malformed container.
class ContainerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedArray {
  std::string name;
  Eigen::MatrixXd data;
};

struct ContainerContents {
  std::string kind;
  int version = 0;
  /// Caller-defined JSON object, stored verbatim in the manifest.
  std::string meta_json;
  std::vector<NamedArray> arrays;
};

/// Binary layout:
///
///   bytes 0..7    magic "MEMOIRC1"
///   bytes 8..15   manifest length L, uint64 little-endian
///   next L bytes  UTF-8 JSON manifest:
///                   {"kind", "version", "meta",
///                    "arrays": [{"name", "rows", "cols", "offset"}],
///                    "payload_doubles"}
///   remainder     payload: row-major IEEE-754 binary64, little-endian;
///                 "offset" counts doubles from the payload start.
std::string write_container(const ContainerContents& contents);

/// Throws ContainerError on bad magic, kind/version mismatch (when
/// `expected_kind` is non-empty), malformed manifest or truncated payload.
ContainerContents read_container(std::string_view bytes, std::string_view expected_kind = {},
                                 int expected_version = 0);

std::string read_binary_file(const std::string& path);
void write_binary_file(const std::string& path, std::string_view bytes);

}  // namespace memoir
