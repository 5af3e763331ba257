#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "emo/core/nn.hpp"
#include "emo/core/rng.hpp"
#include "emo/core/tensor.hpp"

namespace emo {

/// Named-block binary container used for every checkpoint.
///
/// Layout (little-endian):
///   "EMOCKPT1" | u32 format | u32 0 | u64 nblocks
///   per block: u32 name_len | name | u8 kind | u32 rank | u64 dims[rank] | payload
///   u64 FNV-1a of all preceding bytes
/// kind 0 = f64 tensor, 1 = u64 array, 2 = raw bytes. Doubles are written as
/// their IEEE bit patterns, so save/load round-trips bit-exactly.
class Container {
 public:
  static constexpr std::uint32_t kFormat = 1;

  void put(const std::string& name, const Tensor& tensor);
  void put_u64(const std::string& name, std::vector<std::uint64_t> values);
  void put_string(const std::string& name, std::string value);
  void put_f64(const std::string& name, double value) { put(name, Tensor({1}, {value})); }

  bool has(const std::string& name) const { return blocks_.count(name) != 0; }
  const Tensor& tensor(const std::string& name) const;
  const std::vector<std::uint64_t>& u64(const std::string& name) const;
  const std::string& string(const std::string& name) const;
  double f64(const std::string& name) const;
  std::uint64_t scalar_u64(const std::string& name) const;
  std::vector<std::string> names() const;

  std::string serialize() const;
  static Container parse(std::string_view bytes);

  void save(const std::filesystem::path& path) const;
  static Container load(const std::filesystem::path& path);

  // Parameter values, grads are not persisted.
  void put_params(const std::string& prefix, std::span<nn::Parameter* const> params);
  void get_params(const std::string& prefix, std::span<nn::Parameter* const> params) const;
  void put_buffers(const std::string& prefix, std::span<Tensor* const> buffers);
  void get_buffers(const std::string& prefix, std::span<Tensor* const> buffers) const;
  void put_adam(const std::string& prefix, const nn::AdamState& state);
  void get_adam(const std::string& prefix, nn::AdamState& state) const;
  void put_rng(const std::string& name, const RngStream& rng);
  void get_rng(const std::string& name, RngStream& rng) const;

 private:
  using Payload = std::variant<Tensor, std::vector<std::uint64_t>, std::string>;
  const Payload& block(const std::string& name) const;

  std::map<std::string, Payload> blocks_;
};

}  // namespace emo
