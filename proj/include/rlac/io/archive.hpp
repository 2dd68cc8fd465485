#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlac/errors.hpp"
#include "rlac/rng.hpp"

namespace rlac::io {

// Binary container of named arrays.
//
//   magic "RLACCKPT" | u32 version | u64 header length | header JSON
//   | array payloads in header order (little-endian f64 or u64)
//   | u64 FNV-1a of every preceding byte
//
// The header lists each array's name, element type and count and carries
// free-form metadata under "meta".
class Archive {
 public:
  static constexpr char kMagic[8] = {'R', 'L', 'A', 'C', 'C', 'K', 'P', 'T'};
  static constexpr std::uint32_t kVersion = 1;

  nlohmann::json meta = nlohmann::json::object();

  void put(const std::string& name, std::span<const double> values) {
    entries_[name] = Entry{false, std::vector<double>(values.begin(), values.end()), {}};
  }
  void put(const std::string& name, double value) { put(name, std::span<const double>(&value, 1)); }
  void put_u64(const std::string& name, std::span<const std::uint64_t> values) {
    entries_[name] = Entry{true, {}, std::vector<std::uint64_t>(values.begin(), values.end())};
  }
  void put_u64(const std::string& name, std::uint64_t value) { put_u64(name, std::span<const std::uint64_t>(&value, 1)); }

  bool has(const std::string& name) const { return entries_.count(name) != 0; }

  const std::vector<double>& get(const std::string& name) const {
    const Entry& e = find(name);
    if (e.is_u64) throw IoError("checkpoint array '" + name + "' is not f64");
    return e.f64;
  }
  const std::vector<std::uint64_t>& get_u64(const std::string& name) const {
    const Entry& e = find(name);
    if (!e.is_u64) throw IoError("checkpoint array '" + name + "' is not u64");
    return e.u64;
  }
  double scalar(const std::string& name) const { return single(get(name), name); }
  std::uint64_t scalar_u64(const std::string& name) const { return single(get_u64(name), name); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
  }

  std::string serialize() const {
    nlohmann::json header;
    header["meta"] = meta;
    header["arrays"] = nlohmann::json::array();
    for (const auto& [name, e] : entries_)
      header["arrays"].push_back({{"name", name}, {"type", e.is_u64 ? "u64" : "f64"}, {"count", e.count()}});
    const std::string h = header.dump();
    std::string out(kMagic, sizeof kMagic);
    append(out, kVersion);
    append(out, static_cast<std::uint64_t>(h.size()));
    out += h;
    for (const auto& [name, e] : entries_) {
      if (e.is_u64) {
        for (std::uint64_t v : e.u64) append(out, v);
      } else {
        for (double v : e.f64) append(out, v);
      }
    }
    append(out, checksum(out));
    return out;
  }

  static Archive deserialize(const std::string& bytes) {
    std::size_t pos = 0;
    auto need = [&](std::size_t n, const char* what) {
      if (bytes.size() < pos + n) throw IoError(std::string("checkpoint truncated while reading ") + what);
    };
    need(sizeof kMagic, "magic");
    if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw IoError("not a checkpoint file (bad magic)");
    pos += sizeof kMagic;
    need(4 + 8, "header");
    const auto version = read<std::uint32_t>(bytes, pos);
    if (version != kVersion)
      throw IoError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                    std::to_string(kVersion) + ")");
    const auto hlen = read<std::uint64_t>(bytes, pos);
    need(hlen, "header");
    if (bytes.size() < 8 || bytes.size() - 8 < pos) throw IoError("checkpoint truncated");
    {
      std::size_t tail = bytes.size() - 8;
      const auto stored = read<std::uint64_t>(bytes, tail);
      if (stored != checksum(std::string_view(bytes).substr(0, bytes.size() - 8)))
        throw IoError("checkpoint checksum mismatch (truncated or corrupt)");
    }
    Archive a;
    try {
      const nlohmann::json header = nlohmann::json::parse(bytes.substr(pos, hlen));
      pos += hlen;
      a.meta = header.value("meta", nlohmann::json::object());
      for (const auto& item : header.at("arrays")) {
        const std::string name = item.at("name");
        const std::uint64_t count = item.at("count");
        const bool is_u64 = item.at("type") == "u64";
        if (count > (bytes.size() - 8 - pos) / 8) throw IoError("checkpoint truncated in array '" + name + "'");
        Entry e{is_u64, {}, {}};
        if (is_u64) {
          e.u64.resize(count);
          for (auto& v : e.u64) v = read<std::uint64_t>(bytes, pos);
        } else {
          e.f64.resize(count);
          for (auto& v : e.f64) v = read<double>(bytes, pos);
        }
        a.entries_[name] = std::move(e);
      }
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("checkpoint header unreadable: ") + e.what());
    }
    if (pos != bytes.size() - 8) throw IoError("checkpoint has trailing bytes");
    return a;
  }

  // Written to a temporary sibling and renamed, so a crash never leaves a
  // half-written file under `path`.
  void save(const std::filesystem::path& path) const {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
      const std::string bytes = serialize();
      f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!f) throw IoError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into " + path.string() + ": " + ec.message());
  }

  static Archive load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
  }

 private:
  struct Entry {
    bool is_u64 = false;
    std::vector<double> f64;
    std::vector<std::uint64_t> u64;
    std::size_t count() const { return is_u64 ? u64.size() : f64.size(); }
  };

  const Entry& find(const std::string& name) const {
    const auto it = entries_.find(name);
    if (it == entries_.end()) throw IoError("checkpoint is missing array '" + name + "'");
    return it->second;
  }

  template <class T>
  static T single(const std::vector<T>& v, const std::string& name) {
    if (v.size() != 1) throw IoError("checkpoint entry '" + name + "' is not a scalar");
    return v[0];
  }

  template <class T>
  static void append(std::string& out, T v) {
    static_assert(std::endian::native == std::endian::little, "little-endian host required");
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
  }

  template <class T>
  static T read(const std::string& in, std::size_t& pos) {
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }

  static std::uint64_t checksum(std::string_view bytes) { return fnv1a(bytes); }

  std::map<std::string, Entry> entries_;
};

}  // namespace rlac::io
