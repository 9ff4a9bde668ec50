#include "purouter/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "purouter/errors.hpp"

namespace purouter::nn {
namespace {

constexpr std::size_t kMagicLen = sizeof(kCheckpointMagic) - 1;

void put_u64(std::vector<char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(const std::vector<char>& bytes) : bytes_(bytes) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw IoError("checkpoint truncated at byte " + std::to_string(pos_));
  }

  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<char> serialize_parameters(const ParameterSet& params) {
  std::vector<char> out(kCheckpointMagic, kCheckpointMagic + kMagicLen);
  put_u64(out, params.size());
  for (const auto& p : params) {
    put_u64(out, p.name.size());
    out.insert(out.end(), p.name.begin(), p.name.end());
    put_u64(out, p.value.rank());
    for (auto d : p.value.shape()) put_u64(out, d);
    for (double v : p.value.storage()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

ParameterSet deserialize_parameters(const std::vector<char>& bytes) {
  Reader in(bytes);
  if (in.str(kMagicLen) != std::string(kCheckpointMagic, kMagicLen)) throw IoError("checkpoint: bad magic");
  const std::uint64_t count = in.u64();
  ParameterSet params;
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = in.str(in.u64());
    const std::uint64_t rank = in.u64();
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = in.u64();
    std::vector<double> data(shape_product(shape));
    for (auto& v : data) v = std::bit_cast<double>(in.u64());
    params.add(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (!in.done()) throw IoError("checkpoint: trailing bytes");
  return params;
}

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path) {
  const auto bytes = serialize_parameters(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

ParameterSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_parameters(bytes);
}

void load_checkpoint_into(ParameterSet& params, const std::filesystem::path& path) {
  params.assign_values(load_checkpoint(path));
}

}  // namespace purouter::nn
