#include "core/tensor_io.hpp"

#include <cstring>
#include <fstream>

#include "core/error.hpp"

namespace udvd {

namespace {

constexpr char kMagic[8] = {'U', 'D', 'V', 'D', 'T', 'E', 'N', '1'};

// All integers are little-endian on disk. The host is assumed little-endian
// (checked once at startup of the serializers).
void require_le() {
  const uint32_t probe = 1;
  unsigned char b;
  std::memcpy(&b, &probe, 1);
  if (b != 1) fail(ErrorCode::Internal, "big-endian hosts are not supported");
}

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::istream& is, const std::string& what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) fail(ErrorCode::Io, "truncated file while reading ", what);
  return v;
}

void write_ten_payload(std::ostream& os, const TenData& d) {
  os.write(kMagic, sizeof(kMagic));
  write_pod<uint32_t>(os, static_cast<uint32_t>(d.dims.size()));
  for (uint32_t dim : d.dims) write_pod<uint32_t>(os, dim);
  os.write(reinterpret_cast<const char*>(d.values.data()),
           static_cast<std::streamsize>(d.values.size() * sizeof(float)));
}

TenData read_ten_payload(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    fail(ErrorCode::Io, "not a .ten payload (bad magic)");
  TenData d;
  uint32_t rank = read_pod<uint32_t>(is, "rank");
  if (rank > 8) fail(ErrorCode::Io, "implausible .ten rank ", rank);
  d.dims.resize(rank);
  for (uint32_t i = 0; i < rank; ++i) d.dims[i] = read_pod<uint32_t>(is, "dims");
  d.values.resize(d.numel());
  is.read(reinterpret_cast<char*>(d.values.data()),
          static_cast<std::streamsize>(d.values.size() * sizeof(float)));
  if (!is) fail(ErrorCode::Io, "truncated .ten payload");
  return d;
}

}  // namespace

void write_ten(const std::string& path, const TenData& data) {
  require_le();
  if (data.values.size() != data.numel())
    fail_shape(".ten value count ", data.values.size(), " does not match dims product ",
               data.numel());
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::Io, "cannot open for writing: ", path);
  write_ten_payload(os, data);
  if (!os) fail(ErrorCode::Io, "write failed: ", path);
}

TenData read_ten(const std::string& path) {
  require_le();
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::Io, "cannot open: ", path);
  return read_ten_payload(is);
}

TenData to_ten(const Tensor& t) {
  TenData d;
  d.dims = {static_cast<uint32_t>(t.n()), static_cast<uint32_t>(t.c()),
            static_cast<uint32_t>(t.h()), static_cast<uint32_t>(t.w())};
  d.values.assign(t.data(), t.data() + t.numel());
  return d;
}

Tensor tensor_from_ten(const TenData& d) {
  if (d.dims.size() < 1 || d.dims.size() > 4)
    fail_shape("expected rank 1..4 for a tensor, got rank ", d.dims.size());
  std::vector<uint32_t> dims(4 - d.dims.size(), 1);
  dims.insert(dims.end(), d.dims.begin(), d.dims.end());
  Tensor t(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]),
           static_cast<int>(dims[3]));
  if (t.numel() != d.values.size())
    fail_shape("tensor payload size mismatch: ", d.values.size(), " vs ", t.numel());
  std::memcpy(t.data(), d.values.data(), d.values.size() * sizeof(float));
  return t;
}

void save_tensor(const Tensor& t, const std::string& path) { write_ten(path, to_ten(t)); }

Tensor load_tensor(const std::string& path) { return tensor_from_ten(read_ten(path)); }

const TenData* NamedTensors::find(const std::string& name) const {
  for (const auto& [n, d] : items)
    if (n == name) return &d;
  return nullptr;
}

void NamedTensors::put(const std::string& name, TenData data) {
  for (auto& [n, d] : items) {
    if (n == name) {
      d = std::move(data);
      return;
    }
  }
  items.emplace_back(name, std::move(data));
}

void save_container(const NamedTensors& c, const std::string& path) {
  require_le();
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::Io, "cannot open for writing: ", path);
  write_pod<uint32_t>(os, static_cast<uint32_t>(c.items.size()));
  for (const auto& [name, data] : c.items) {
    if (name.size() > 0xffff) fail_param("container entry name too long: ", name);
    write_pod<uint16_t>(os, static_cast<uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_ten_payload(os, data);
  }
  if (!os) fail(ErrorCode::Io, "write failed: ", path);
}

NamedTensors load_container(const std::string& path) {
  require_le();
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::Io, "cannot open: ", path);
  NamedTensors c;
  uint32_t count = read_pod<uint32_t>(is, "entry count");
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t len = read_pod<uint16_t>(is, "name length");
    std::string name(len, '\0');
    is.read(name.data(), len);
    if (!is) fail(ErrorCode::Io, "truncated container name in ", path);
    c.items.emplace_back(std::move(name), read_ten_payload(is));
  }
  return c;
}

}  // namespace udvd
