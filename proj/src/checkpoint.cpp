#include "dwrpm/checkpoint.hpp"

#include <fstream>

#include "dwrpm/binary_io.hpp"
#include "dwrpm/errors.hpp"

namespace dwrpm {
namespace {

constexpr char kMagic[9] = "DWRPMCKP";
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kMaxRank = 8;

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelGraph& model,
                     const Normalizer& normalizer, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  using namespace binary;
  put_magic(out, kMagic, kVersion);
  put_string(out, to_string(model.architecture()));
  put_u64(out, model.seq_len());
  const ArchitectureOptions& o = model.options();
  put_u64(out, o.hidden.size());
  for (std::size_t h : o.hidden) put_u64(out, h);
  put_u64(out, o.filters);
  put_u64(out, o.kernel_len);
  put_u64(out, o.pool_window);
  put_u64(out, o.lstm_units);
  put_f64(out, o.dropout);
  put_f64(out, normalizer.x_min());
  put_f64(out, normalizer.x_max());
  put_u64(out, seed);

  const auto names = model.parameter_names();
  const auto params = model.parameters();
  put_u64(out, params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    put_string(out, names[i]);
    put_u64(out, params[i]->rank());
    for (std::size_t d : params[i]->shape()) put_u64(out, d);
    for (double v : params[i]->data()) put_f64(out, v);
  }
  out.flush();
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  using namespace binary;
  const std::uint32_t version = expect_magic(in, kMagic, "checkpoint");
  if (version != kVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));

  Architecture arch;
  try {
    arch = parse_architecture(get_string(in, 64));
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  const std::uint64_t seq_len = get_u64(in);
  ArchitectureOptions o;
  const std::uint64_t n_hidden = get_u64(in);
  if (n_hidden > 64) throw FormatError("checkpoint: implausible hidden layer count");
  for (std::uint64_t i = 0; i < n_hidden; ++i) o.hidden.push_back(get_u64(in));
  o.filters = get_u64(in);
  o.kernel_len = get_u64(in);
  o.pool_window = get_u64(in);
  o.lstm_units = get_u64(in);
  o.dropout = get_f64(in);
  const double x_min = get_f64(in);
  const double x_max = get_f64(in);
  const std::uint64_t seed = get_u64(in);

  Rng rng(seed);
  Checkpoint ck{build_model(arch, seq_len, rng, o), Normalizer(x_min, x_max), seed};
  auto params = ck.model.parameters();
  const std::uint64_t count = get_u64(in);
  if (count != params.size())
    throw FormatError("checkpoint has " + std::to_string(count) + " tensors, model expects " +
                      std::to_string(params.size()));
  for (NamedTensor& p : params) {
    const std::string name = get_string(in, 256);
    if (name != p.name) throw FormatError("checkpoint tensor '" + name + "', expected '" + p.name + "'");
    const std::uint64_t rank = get_u64(in);
    if (rank > kMaxRank) throw FormatError("checkpoint tensor '" + name + "' has bad rank");
    Shape shape(rank);
    for (auto& d : shape) d = get_u64(in);
    if (shape != p.tensor->shape())
      throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_string(shape) +
                        ", expected " + shape_string(p.tensor->shape()));
    for (double& v : p.tensor->data()) v = get_f64(in);
    if (!p.tensor->all_finite()) throw FormatError("checkpoint tensor '" + name + "' is not finite");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in checkpoint");
  return ck;
}

}  // namespace dwrpm
