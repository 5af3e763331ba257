#include "emo/core/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "emo/core/errors.hpp"

namespace emo {

namespace {

constexpr char kMagic[8] = {'E', 'M', 'O', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes a little-endian host");

template <typename T>
void append(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T take() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take_bytes(std::size_t n) {
    need(n);
    auto view = bytes_.substr(pos_, n);
    pos_ += n;
    return view;
  }

  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError("checkpoint truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void Container::put(const std::string& name, const Tensor& tensor) { blocks_[name] = tensor; }

void Container::put_u64(const std::string& name, std::vector<std::uint64_t> values) {
  blocks_[name] = std::move(values);
}

void Container::put_string(const std::string& name, std::string value) { blocks_[name] = std::move(value); }

const Container::Payload& Container::block(const std::string& name) const {
  auto it = blocks_.find(name);
  if (it == blocks_.end()) throw IoError("checkpoint is missing block '" + name + "'");
  return it->second;
}

const Tensor& Container::tensor(const std::string& name) const {
  const auto* t = std::get_if<Tensor>(&block(name));
  if (!t) throw IoError("checkpoint block '" + name + "' is not a tensor");
  return *t;
}

const std::vector<std::uint64_t>& Container::u64(const std::string& name) const {
  const auto* v = std::get_if<std::vector<std::uint64_t>>(&block(name));
  if (!v) throw IoError("checkpoint block '" + name + "' is not a u64 array");
  return *v;
}

const std::string& Container::string(const std::string& name) const {
  const auto* s = std::get_if<std::string>(&block(name));
  if (!s) throw IoError("checkpoint block '" + name + "' is not a byte string");
  return *s;
}

double Container::f64(const std::string& name) const {
  const auto& t = tensor(name);
  if (t.size() != 1) throw IoError("checkpoint block '" + name + "' is not a scalar");
  return t[0];
}

std::uint64_t Container::scalar_u64(const std::string& name) const {
  const auto& v = u64(name);
  if (v.size() != 1) throw IoError("checkpoint block '" + name + "' is not a scalar");
  return v[0];
}

std::vector<std::string> Container::names() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : blocks_) out.push_back(k);
  return out;
}

std::string Container::serialize() const {
  std::string out(kMagic, sizeof(kMagic));
  append<std::uint32_t>(out, kFormat);
  append<std::uint32_t>(out, 0);
  append<std::uint64_t>(out, blocks_.size());
  for (const auto& [name, payload] : blocks_) {
    append<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    if (const auto* t = std::get_if<Tensor>(&payload)) {
      append<std::uint8_t>(out, 0);
      append<std::uint32_t>(out, static_cast<std::uint32_t>(t->rank()));
      for (auto d : t->shape()) append<std::uint64_t>(out, d);
      out.append(reinterpret_cast<const char*>(t->data()), t->size() * sizeof(double));
    } else if (const auto* v = std::get_if<std::vector<std::uint64_t>>(&payload)) {
      append<std::uint8_t>(out, 1);
      append<std::uint32_t>(out, 1);
      append<std::uint64_t>(out, v->size());
      out.append(reinterpret_cast<const char*>(v->data()), v->size() * sizeof(std::uint64_t));
    } else {
      const auto& s = std::get<std::string>(payload);
      append<std::uint8_t>(out, 2);
      append<std::uint32_t>(out, 1);
      append<std::uint64_t>(out, s.size());
      out += s;
    }
  }
  append<std::uint64_t>(out, fnv1a64(out));
  return out;
}

Container Container::parse(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) + 24 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a checkpoint file (bad magic)");
  const std::string_view body = bytes.substr(0, bytes.size() - sizeof(std::uint64_t));
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), sizeof(stored));
  if (stored != fnv1a64(body)) throw IoError("checkpoint checksum mismatch (file corrupt)");

  Reader r(body);
  r.take_bytes(sizeof(kMagic));
  const auto format = r.take<std::uint32_t>();
  if (format != kFormat)
    throw VersionError("checkpoint format " + std::to_string(format) + " unsupported (expected " +
                       std::to_string(kFormat) + ")");
  r.take<std::uint32_t>();
  const auto count = r.take<std::uint64_t>();
  Container c;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.take<std::uint32_t>();
    std::string name(r.take_bytes(name_len));
    const auto kind = r.take<std::uint8_t>();
    const auto rank = r.take<std::uint32_t>();
    if (rank > 16) throw IoError("checkpoint block '" + name + "' has implausible rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.take<std::uint64_t>();
    const std::size_t n = shape_size(shape);
    if (kind == 0) {
      if (n > body.size()) throw IoError("checkpoint truncated");
      std::vector<double> values(n);
      std::memcpy(values.data(), r.take_bytes(n * sizeof(double)).data(), n * sizeof(double));
      c.blocks_[name] = Tensor(std::move(shape), std::move(values));
    } else if (kind == 1) {
      if (n > body.size()) throw IoError("checkpoint truncated");
      std::vector<std::uint64_t> values(n);
      if (n) std::memcpy(values.data(), r.take_bytes(n * sizeof(std::uint64_t)).data(), n * sizeof(std::uint64_t));
      c.blocks_[name] = std::move(values);
    } else if (kind == 2) {
      c.blocks_[name] = std::string(r.take_bytes(n));
    } else {
      throw IoError("checkpoint block '" + name + "' has unknown kind");
    }
  }
  if (r.position() != body.size()) throw IoError("checkpoint has trailing bytes");
  return c;
}

void Container::save(const std::filesystem::path& path) const {
  const std::string bytes = serialize();
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

Container Container::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void Container::put_params(const std::string& prefix, std::span<nn::Parameter* const> params) {
  for (std::size_t i = 0; i < params.size(); ++i)
    put(prefix + "/" + std::to_string(i) + ":" + params[i]->name, params[i]->value);
}

void Container::get_params(const std::string& prefix, std::span<nn::Parameter* const> params) const {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = tensor(prefix + "/" + std::to_string(i) + ":" + params[i]->name);
    require_same_shape(t, params[i]->value, ("checkpoint parameter " + prefix).c_str());
  }
  for (std::size_t i = 0; i < params.size(); ++i)
    params[i]->value = tensor(prefix + "/" + std::to_string(i) + ":" + params[i]->name);
}

void Container::put_buffers(const std::string& prefix, std::span<Tensor* const> buffers) {
  for (std::size_t i = 0; i < buffers.size(); ++i) put(prefix + "/buf" + std::to_string(i), *buffers[i]);
}

void Container::get_buffers(const std::string& prefix, std::span<Tensor* const> buffers) const {
  for (std::size_t i = 0; i < buffers.size(); ++i) {
    const auto& t = tensor(prefix + "/buf" + std::to_string(i));
    require_same_shape(t, *buffers[i], ("checkpoint buffer " + prefix).c_str());
    *buffers[i] = t;
  }
}

void Container::put_adam(const std::string& prefix, const nn::AdamState& state) {
  put_u64(prefix + "/step", {state.step, state.first.size()});
  for (std::size_t i = 0; i < state.first.size(); ++i) {
    put(prefix + "/m" + std::to_string(i), state.first[i]);
    put(prefix + "/v" + std::to_string(i), state.second[i]);
  }
}

void Container::get_adam(const std::string& prefix, nn::AdamState& state) const {
  const auto& head = u64(prefix + "/step");
  if (head.size() != 2) throw IoError("checkpoint adam header malformed");
  state.step = head[0];
  state.first.clear();
  state.second.clear();
  for (std::uint64_t i = 0; i < head[1]; ++i) {
    state.first.push_back(tensor(prefix + "/m" + std::to_string(i)));
    state.second.push_back(tensor(prefix + "/v" + std::to_string(i)));
  }
}

void Container::put_rng(const std::string& name, const RngStream& rng) {
  const auto s = rng.state();
  put_u64(name, {s.key, s.block, s.lane});
}

void Container::get_rng(const std::string& name, RngStream& rng) const {
  const auto& v = u64(name);
  if (v.size() != 3) throw IoError("checkpoint rng block '" + name + "' malformed");
  rng.set_state({v[0], v[1], static_cast<std::uint32_t>(v[2])});
}

}  // namespace emo
