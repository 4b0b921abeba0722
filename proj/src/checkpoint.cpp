#include "evclip/checkpoint.hpp"

#include <map>

#include "evclip/binary_io.hpp"
#include "evclip/error.hpp"

namespace evclip {

namespace {

constexpr char kMagic[4] = {'E', 'V', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxCount = 1u << 16;
constexpr std::uint32_t kMaxDim = 1u << 24;

void put_matrix(bin::Writer& w, const Eigen::MatrixXf& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.f32(m(r, c));
  }
}

Eigen::MatrixXf get_matrix(bin::Reader& r, std::uint32_t rows, std::uint32_t cols, const char* field) {
  r.need(static_cast<std::size_t>(rows) * cols * 4, field);
  Eigen::MatrixXf m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = r.f32(field);
  }
  return m;
}

std::pair<std::uint32_t, std::uint32_t> get_shape(bin::Reader& r) {
  const std::size_t at = r.offset();
  const std::uint32_t rows = r.u32("tensor rows");
  const std::uint32_t cols = r.u32("tensor cols");
  if (rows > kMaxDim || cols > kMaxDim || static_cast<std::uint64_t>(rows) * cols > kMaxDim) {
    r.fail("implausible tensor shape", at);
  }
  return {rows, cols};
}

}  // namespace

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ck) {
  bin::Writer w;
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u64(ck.digest);
  w.u64(ck.seed);
  w.u32(ck.epochs);
  w.u32(static_cast<std::uint32_t>(ck.sections.size()));
  for (const auto& s : ck.sections) {
    w.str(s.name);
    w.u32(static_cast<std::uint32_t>(s.tensors.size()));
    for (const auto& t : s.tensors) {
      w.str(t.name);
      w.u32(static_cast<std::uint32_t>(t.value.rows()));
      w.u32(static_cast<std::uint32_t>(t.value.cols()));
      put_matrix(w, t.value);
    }
  }
  w.u32(ck.has_optimizer ? 1 : 0);
  if (ck.has_optimizer) {
    w.u64(ck.optimizer_step);
    w.u32(static_cast<std::uint32_t>(ck.moments.size()));
    for (const auto& m : ck.moments) {
      if (m.first.rows() != m.second.rows() || m.first.cols() != m.second.cols()) {
        throw FormatError("checkpoint: moment shapes differ for '" + m.name + "'");
      }
      w.str(m.name);
      w.u32(static_cast<std::uint32_t>(m.first.rows()));
      w.u32(static_cast<std::uint32_t>(m.first.cols()));
      put_matrix(w, m.first);
      put_matrix(w, m.second);
    }
  }
  const std::uint64_t sum = bin::byte_sum(w.buffer().data(), w.size());
  w.u64(sum);
  return w.take();
}

Checkpoint parse_checkpoint(const std::vector<unsigned char>& bytes, const std::string& what) {
  bin::Reader r(bytes, what);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) r.fail("bad magic (expected EVCK)", 0);
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) r.fail("unsupported version " + std::to_string(version), 4);
  Checkpoint ck;
  ck.digest = r.u64("digest");
  ck.seed = r.u64("seed");
  ck.epochs = r.u32("epochs");
  std::size_t at = r.offset();
  const std::uint32_t n_sections = r.u32("section count");
  if (n_sections > kMaxCount) r.fail("implausible section count", at);
  for (std::uint32_t s = 0; s < n_sections; ++s) {
    CheckpointSection sec;
    sec.name = r.str("section name");
    at = r.offset();
    const std::uint32_t n = r.u32("tensor count");
    if (n > kMaxCount) r.fail("implausible tensor count", at);
    for (std::uint32_t t = 0; t < n; ++t) {
      CheckpointTensor tensor;
      tensor.name = r.str("tensor name");
      const auto [rows, cols] = get_shape(r);
      tensor.value = get_matrix(r, rows, cols, "tensor data");
      sec.tensors.push_back(std::move(tensor));
    }
    ck.sections.push_back(std::move(sec));
  }
  at = r.offset();
  const std::uint32_t has_opt = r.u32("optimizer flag");
  if (has_opt > 1) r.fail("bad optimizer flag", at);
  ck.has_optimizer = has_opt == 1;
  if (ck.has_optimizer) {
    ck.optimizer_step = r.u64("optimizer step");
    at = r.offset();
    const std::uint32_t n = r.u32("moment count");
    if (n > kMaxCount) r.fail("implausible moment count", at);
    for (std::uint32_t t = 0; t < n; ++t) {
      CheckpointMoments m;
      m.name = r.str("moment name");
      const auto [rows, cols] = get_shape(r);
      m.first = get_matrix(r, rows, cols, "first moment");
      m.second = get_matrix(r, rows, cols, "second moment");
      ck.moments.push_back(std::move(m));
    }
  }
  const std::size_t body = r.offset();
  const std::uint64_t stored = r.u64("checksum");
  if (stored != bin::byte_sum(bytes.data(), body)) r.fail("checksum mismatch", body);
  if (r.remaining() != 0) r.fail("trailing bytes after checksum", r.offset());
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  bin::write_file(path, serialize_checkpoint(ck));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint '" + path.string() + "' does not exist");
  return parse_checkpoint(bin::read_file(path), path.string());
}

Checkpoint make_checkpoint(const PromptParams& params, std::uint64_t digest, std::uint64_t seed, int epochs,
                           const AdamState* optimizer, const ParameterRefs& trainable) {
  Checkpoint ck;
  ck.digest = digest;
  ck.seed = seed;
  ck.epochs = static_cast<std::uint32_t>(epochs);
  const auto pack = [](const std::string& name, const ConstParameterRefs& refs) {
    CheckpointSection s{name, {}};
    for (const auto* p : refs) s.tensors.push_back({p->name, p->value.cast<float>()});
    return s;
  };
  ck.sections.push_back(pack("mask_generator", params.mask.parameters()));
  ck.sections.push_back(pack("context_generator", params.context.parameters()));
  if (optimizer && optimizer->step > 0) {
    if (optimizer->first.size() != trainable.size()) throw std::logic_error("make_checkpoint: moment count mismatch");
    ck.has_optimizer = true;
    ck.optimizer_step = static_cast<std::uint64_t>(optimizer->step);
    for (std::size_t i = 0; i < trainable.size(); ++i) {
      ck.moments.push_back({trainable[i]->name, optimizer->first[i].cast<float>(), optimizer->second[i].cast<float>()});
    }
  }
  return ck;
}

void restore_prompts(const Checkpoint& ck, PromptParams& params) {
  std::map<std::string, const CheckpointTensor*> by_name;
  for (const auto& s : ck.sections) {
    for (const auto& t : s.tensors) by_name[t.name] = &t;
  }
  for (auto* p : params.parameters()) {
    const auto it = by_name.find(p->name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks tensor '" + p->name + "'");
    const auto& v = it->second->value;
    if (v.rows() != p->value.rows() || v.cols() != p->value.cols()) {
      throw FormatError("checkpoint tensor '" + p->name + "' has shape " + std::to_string(v.rows()) + "x" +
                        std::to_string(v.cols()) + ", expected " + std::to_string(p->value.rows()) + "x" +
                        std::to_string(p->value.cols()));
    }
    p->value = v.cast<double>();
  }
}

}  // namespace evclip
