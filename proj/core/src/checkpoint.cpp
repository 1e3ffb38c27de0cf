#include "dispnet/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "detail/binary_io.hpp"

namespace dispnet {

namespace {

constexpr const char* kMagic = "dispnet-checkpoint";

std::string exact(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& key) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw FormatError("checkpoint: bad value for " + key);
  return v;
}

int parse_int(const std::string& s, const std::string& key) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw FormatError("checkpoint: bad value for " + key);
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const auto& c = ckpt.config;
  if (static_cast<int>(ckpt.species.size()) != c.n_species) {
    throw Error("checkpoint: species table size does not match n_species");
  }
  std::ostringstream h;
  h << kMagic << ' ' << kCheckpointVersion << '\n';
  h << "embedding_width " << c.embedding_width << '\n'
    << "n_rbf " << c.n_rbf << '\n'
    << "p " << c.p << '\n'
    << "n_extra " << c.n_extra << '\n'
    << "n_cut " << c.n_cut << '\n'
    << "n_species " << c.n_species << '\n'
    << "projection_hidden " << c.projection_hidden << '\n'
    << "rbf_trainable " << (c.rbf_trainable ? 1 : 0) << '\n'
    << "rbf_gamma0 " << exact(c.rbf_gamma0) << '\n'
    << "rbf_mu_max " << exact(c.rbf_mu_max) << '\n'
    << "force_scale " << exact(c.force_scale) << '\n';
  h << "species";
  for (const auto& s : ckpt.species.symbols()) h << ' ' << s;
  h << '\n' << "tensors " << ckpt.params.size() << '\n';
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    h << "tensor " << ckpt.params.name(i) << ' ' << ckpt.params[i].rows() << ' ' << ckpt.params[i].cols() << '\n';
  }
  h << "end\n";
  out << h.str();
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    const auto& m = ckpt.params[i];
    for (Eigen::Index k = 0; k < m.size(); ++k) detail::write_le(out, m.data()[k]);
  }
  if (!out) throw Error("checkpoint: write failed");
}

void write_checkpoint_file(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint read_checkpoint(std::istream& in) {
  long long offset = 0;
  auto next_line = [&](const char* expect) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError(std::string("checkpoint: truncated header, expected ") + expect, offset);
    offset += static_cast<long long>(line.size()) + 1;
    return line;
  };

  Checkpoint ck;
  {
    std::istringstream first(next_line("magic"));
    std::string magic;
    int version = 0;
    if (!(first >> magic >> version) || magic != kMagic) throw FormatError("checkpoint: bad magic", 0);
    if (version != kCheckpointVersion) {
      throw FormatError("checkpoint: unsupported format version " + std::to_string(version), 0);
    }
  }

  auto& c = ck.config;
  struct Tensor {
    std::string name;
    int rows, cols;
  };
  std::vector<Tensor> tensors;
  int expected_tensors = -1;
  for (;;) {
    const long long line_start = offset;
    std::istringstream ls(next_line("'end'"));
    std::string key;
    ls >> key;
    if (key == "end") break;
    if (key == "species") {
      std::vector<std::string> symbols;
      for (std::string s; ls >> s;) symbols.push_back(s);
      ck.species = SpeciesTable(symbols);
      continue;
    }
    if (key == "tensor") {
      Tensor t;
      if (!(ls >> t.name >> t.rows >> t.cols) || t.rows <= 0 || t.cols <= 0) {
        throw FormatError("checkpoint: malformed tensor line", line_start);
      }
      tensors.push_back(t);
      continue;
    }
    std::string value;
    if (!(ls >> value)) throw FormatError("checkpoint: missing value for '" + key + "'", line_start);
    if (key == "embedding_width") c.embedding_width = parse_int(value, key);
    else if (key == "n_rbf") c.n_rbf = parse_int(value, key);
    else if (key == "p") c.p = parse_int(value, key);
    else if (key == "n_extra") c.n_extra = parse_int(value, key);
    else if (key == "n_cut") c.n_cut = parse_int(value, key);
    else if (key == "n_species") c.n_species = parse_int(value, key);
    else if (key == "projection_hidden") c.projection_hidden = parse_int(value, key);
    else if (key == "rbf_trainable") c.rbf_trainable = parse_int(value, key) != 0;
    else if (key == "rbf_gamma0") c.rbf_gamma0 = parse_double(value, key);
    else if (key == "rbf_mu_max") c.rbf_mu_max = parse_double(value, key);
    else if (key == "force_scale") c.force_scale = parse_double(value, key);
    else if (key == "tensors") expected_tensors = parse_int(value, key);
    else throw FormatError("checkpoint: unknown header key '" + key + "'", line_start);
  }
  if (expected_tensors != static_cast<int>(tensors.size())) {
    throw FormatError("checkpoint: tensor count does not match the header", offset);
  }
  if (static_cast<int>(ck.species.size()) != c.n_species) {
    throw FormatError("checkpoint: species table size does not match n_species", offset);
  }
  c.validate();

  detail::Reader reader(in, "checkpoint", offset);
  for (const auto& t : tensors) {
    diff::Matrix m(t.rows, t.cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = reader.read<double>(t.name.c_str());
    ck.params.add(t.name, std::move(m));
  }
  if (!reader.at_end()) throw FormatError("checkpoint: trailing bytes after the last tensor", reader.offset());
  // The layout must be exactly what the model builds.
  const auto reference = surrogate::Model(c).init_params(0);
  if (!reference.same_layout(ck.params)) throw FormatError("checkpoint: tensors do not match the model layout");
  ck.params.require_finite("checkpoint");
  return ck;
}

Checkpoint read_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace dispnet
