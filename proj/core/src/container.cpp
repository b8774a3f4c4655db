#include "memoir/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace memoir {
namespace {

constexpr std::string_view kMagic = "MEMOIRC1";

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

void put_double(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

}  // namespace

std::string write_container(const ContainerContents& contents) {
  nlohmann::json manifest;
  manifest["kind"] = contents.kind;
  manifest["version"] = contents.version;
  manifest["meta"] = contents.meta_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(contents.meta_json);
  nlohmann::json arrays = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& a : contents.arrays) {
    arrays.push_back({{"name", a.name}, {"rows", a.data.rows()}, {"cols", a.data.cols()}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(a.data.size());
  }
  manifest["arrays"] = std::move(arrays);
  manifest["payload_doubles"] = offset;
  const std::string text = manifest.dump();

  std::string out(kMagic);
  put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + offset * 8);
  for (const auto& a : contents.arrays) {
    for (Eigen::Index r = 0; r < a.data.rows(); ++r) {
      for (Eigen::Index c = 0; c < a.data.cols(); ++c) put_double(out, a.data(r, c));
    }
  }
  return out;
}

ContainerContents read_container(std::string_view bytes, std::string_view expected_kind, int expected_version) {
  if (bytes.size() < kMagic.size() + 8 || bytes.substr(0, kMagic.size()) != kMagic) {
    throw ContainerError("corrupt payload: bad magic");
  }
  const std::uint64_t manifest_len = get_u64(bytes, kMagic.size());
  const std::size_t manifest_at = kMagic.size() + 8;
  if (manifest_len > bytes.size() - manifest_at) throw ContainerError("corrupt payload: truncated manifest");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(manifest_at, manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw ContainerError(std::string("corrupt payload: manifest: ") + e.what());
  }

  ContainerContents out;
  try {
    out.kind = manifest.at("kind").get<std::string>();
    out.version = manifest.at("version").get<int>();
    out.meta_json = manifest.at("meta").dump();
    if (!expected_kind.empty() && out.kind != expected_kind) {
      throw ContainerError("kind mismatch: expected " + std::string(expected_kind) + ", found " + out.kind);
    }
    if (expected_version != 0 && out.version != expected_version) {
      throw ContainerError("version mismatch: expected " + std::to_string(expected_version) + ", found " +
                           std::to_string(out.version));
    }
    const std::size_t payload_at = manifest_at + manifest_len;
    const auto doubles = manifest.at("payload_doubles").get<std::uint64_t>();
    if (bytes.size() - payload_at != doubles * 8) {
      throw ContainerError("corrupt payload: expected " + std::to_string(doubles * 8) + " payload bytes, found " +
                           std::to_string(bytes.size() - payload_at));
    }
    for (const auto& a : manifest.at("arrays")) {
      NamedArray arr;
      arr.name = a.at("name").get<std::string>();
      const auto rows = a.at("rows").get<Eigen::Index>();
      const auto cols = a.at("cols").get<Eigen::Index>();
      const auto offset = a.at("offset").get<std::uint64_t>();
      if (rows < 0 || cols < 0 || offset + static_cast<std::uint64_t>(rows * cols) > doubles) {
        throw ContainerError("corrupt payload: array '" + arr.name + "' out of bounds");
      }
      arr.data.resize(rows, cols);
      std::size_t at = payload_at + offset * 8;
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c, at += 8) arr.data(r, c) = std::bit_cast<double>(get_u64(bytes, at));
      }
      out.arrays.push_back(std::move(arr));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ContainerError(std::string("corrupt payload: manifest: ") + e.what());
  }
  return out;
}

std::string read_binary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_binary_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace memoir
