#include "percdepth/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace percdepth::checkpoint {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::vector<unsigned char>& b;
  std::string file;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (b.size() - pos < n) throw ParseError(file, pos, std::string("truncated ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
};

}  // namespace

void write_archive(const fs::path& path, const Archive& records) {
  std::string out = "PDGC";
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& [name, t] : records) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, 4);
    for (int d : {t.n(), t.c(), t.h(), t.w()}) put_u32(out, static_cast<std::uint32_t>(d));
    for (Real v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  // Write to a temporary name first so a crash never leaves a half-written checkpoint.
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("cannot write checkpoint " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + path.string() + ": " + ec.message());
}

Archive read_archive(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  Reader r{bytes, path.string()};
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), "PDGC", 4) != 0) throw ParseError(r.file, 0, "bad magic, expected PDGC");
  r.pos = 4;
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) {
    throw ParseError(r.file, 4, "unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32("record count");
  Archive out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = r.u32("name length");
    r.need(len, "name");
    std::string name(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos),
                     bytes.begin() + static_cast<std::ptrdiff_t>(r.pos + len));
    r.pos += len;
    const std::size_t rank_at = r.pos;
    const std::uint32_t rank = r.u32("rank");
    if (rank != 4) throw ParseError(r.file, rank_at, "record '" + name + "' has rank " + std::to_string(rank));
    int dims[4];
    for (int& d : dims) {
      const std::uint32_t v = r.u32("dims");
      if (v > (1u << 28)) throw ParseError(r.file, r.pos - 4, "implausible dimension in '" + name + "'");
      d = static_cast<int>(v);
    }
    Tensor t(dims[0], dims[1], dims[2], dims[3]);
    r.need(t.size() * 4, "payload");
    for (auto& v : t.values()) v = static_cast<Real>(std::bit_cast<float>(r.u32("payload")));
    if (!out.emplace(std::move(name), std::move(t)).second) {
      throw ParseError(r.file, rank_at, "duplicate record");
    }
  }
  if (r.pos != bytes.size()) throw ParseError(r.file, r.pos, "trailing bytes");
  return out;
}

}  // namespace percdepth::checkpoint
