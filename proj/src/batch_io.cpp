#include "ssphere/batch_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <vector>

namespace ssphere {

namespace {

constexpr const char* kMagic = "#simplex-sphere";
constexpr const char* kVersion = "v1";

[[noreturn]] void parse_fail(const std::string& what) {
  throw Error(ErrorKind::parse_error, "batch file: " + what);
}

double parse_double(std::string_view tok) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    parse_fail("bad number '" + std::string(tok) + "'");
  }
  return v;
}

template <typename Int>
Int parse_int(std::string_view tok) {
  Int v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    parse_fail("bad integer '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_batch(std::ostream& os, const SampleBatch& batch) {
  os << kMagic << ' ' << kVersion << " sampler=" << to_string(batch.sampler)
     << " n=" << batch.spec.n << " b=" << format_double(batch.spec.b) << " seed=" << batch.seed
     << " eps=" << (batch.shell ? format_double(batch.shell->eps) : std::string("-")) << '\n';
  std::string line;
  for (Eigen::Index i = 0; i < batch.points.rows(); ++i) {
    line.clear();
    for (Eigen::Index j = 0; j < batch.points.cols(); ++j) {
      if (j) line += ' ';
      line += format_double(batch.points(i, j));
    }
    line += '\n';
    os << line;
  }
}

void write_batch(const std::filesystem::path& path, const SampleBatch& batch) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::invalid_argument, "cannot write " + path.string());
  write_batch(os, batch);
}

SampleBatch read_batch(std::istream& is, bool verify) {
  std::string header;
  if (!std::getline(is, header)) parse_fail("missing header");
  std::istringstream hs(header);
  std::string magic, version;
  hs >> magic >> version;
  if (magic != kMagic) parse_fail("bad magic '" + magic + "'");
  if (version != kVersion) parse_fail("unsupported version '" + version + "'");
  std::map<std::string, std::string> fields;
  for (std::string kv; hs >> kv;) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) parse_fail("bad header field '" + kv + "'");
    fields[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  for (const char* key : {"sampler", "n", "b", "seed", "eps"}) {
    if (!fields.count(key)) parse_fail(std::string("header lacks ") + key);
  }

  SampleBatch batch;
  try {
    batch.sampler = sampler_from_string(fields["sampler"]);
    batch.spec = ManifoldSpec::make(parse_int<int>(fields["n"]), parse_double(fields["b"]));
    if (fields["eps"] != "-") {
      batch.shell = ShellSpec::make(batch.spec.n, batch.spec.b, parse_double(fields["eps"]));
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::parse_error) throw;
    parse_fail(e.what());
  }
  batch.seed = parse_int<std::uint64_t>(fields["seed"]);
  if ((batch.sampler == SamplerId::shell) != batch.shell.has_value()) {
    parse_fail("eps must be given exactly for shell batches");
  }

  const int n = batch.spec.n;
  std::vector<double> flat;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::string_view rest(line);
    int count = 0;
    while (!rest.empty()) {
      const auto sp = rest.find(' ');
      flat.push_back(parse_double(rest.substr(0, sp)));
      ++count;
      if (sp == std::string_view::npos) break;
      rest.remove_prefix(sp + 1);
    }
    if (count != n) parse_fail("point with " + std::to_string(count) + " coordinates, expected n");
  }
  const auto rows = static_cast<Eigen::Index>(flat.size() / n);
  batch.points.resize(rows, n);
  if (rows > 0) batch.points = Eigen::Map<const PointMatrix>(flat.data(), rows, n);
  batch.accepts = rows;
  batch.proposals = rows;
  if (verify) {
    if (const long long bad = first_invalid_point(batch); bad >= 0) {
      parse_fail("point " + std::to_string(bad) + " fails membership");
    }
  }
  return batch;
}

SampleBatch read_batch(const std::filesystem::path& path, bool verify) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::invalid_argument, "cannot read " + path.string());
  return read_batch(is, verify);
}

}  // namespace ssphere
