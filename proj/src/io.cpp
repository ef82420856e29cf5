#include "liftlab/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace liftlab {

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  if (ec) throw Error("IoError", "cannot create directory " + p.parent_path().string());
  fs::path tmp = p;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("IoError", "cannot open " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.flush();
    if (!f) throw Error("IoError", "write failed for " + tmp.string());
  }
  fs::rename(tmp, p, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("IoError", "cannot rename onto " + p.string());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("IoError", "cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string config_hash(const nlohmann::json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fmt_num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

void CsvTable::add(std::vector<std::string> row) {
  if (row.size() != header.size()) throw Error("DimensionMismatch", "CSV row width differs from header");
  rows.push_back(std::move(row));
}

std::string render_csv(const CsvTable& t, const std::string& hash) {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells, const std::string& a, const std::string& b) {
    for (const auto& c : cells) {
      out += c;
      out += ',';
    }
    out += a;
    out += ',';
    out += b;
    out += '\n';
  };
  line(t.header, "config_hash", "code_version");
  for (const auto& r : t.rows) line(r, hash, kCodeVersion);
  return out;
}

namespace {

nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

nlohmann::json to_json(const OperatorMatrix& op) {
  nlohmann::json j;
  j["dim"] = op.dim();
  j["nnz"] = op.entries.nonZeros();
  j["is_generator"] = op.is_generator;
  nlohmann::json e = nlohmann::json::array();
  for (int i = 0; i < op.entries.outerSize(); ++i)
    for (SpMat::InnerIterator it(op.entries, i); it; ++it) e.push_back({i, it.col(), it.value()});
  j["entries"] = e;
  j["weights"] = vec_json(op.reference_measure.weights);
  j["is_atom"] = op.reference_measure.is_atom;
  return j;
}

nlohmann::json to_json(const SpectralData& sd, int max_modes) {
  nlohmann::json j;
  j["is_self_adjoint"] = sd.is_self_adjoint;
  j["gap"] = sd.gap;
  j["gap_imag"] = sd.gap_imag;
  j["degenerate"] = sd.degenerate;
  j["size"] = sd.size();
  nlohmann::json ev = nlohmann::json::array();
  for (int k = 0; k < std::min(sd.size(), max_modes); ++k)
    ev.push_back({sd.eigenvalues[static_cast<std::size_t>(k)].real(), sd.eigenvalues[static_cast<std::size_t>(k)].imag()});
  j["eigenvalues"] = ev;
  return j;
}

nlohmann::json to_json(const LiftReport& r) {
  return {{"first_order_residual", r.first_order_residual},
          {"first_order_transport", r.first_order_transport},
          {"second_order_residual", r.second_order_residual},
          {"antisymmetry_residual", r.antisymmetry_residual},
          {"second_order_x", r.second_order_x},
          {"dirichlet_x", r.dirichlet_x},
          {"h", r.h},
          {"probe_count", r.probe_count}};
}

nlohmann::json to_json(const AssumptionConstants& c) {
  nlohmann::json j{{"process", process_name(c.process)},
                   {"m", c.m},
                   {"m_v", c.m_v},
                   {"C1", c.C1},
                   {"C2", c.C2},
                   {"gamma", c.gamma},
                   {"T", c.T},
                   {"d", c.d},
                   {"nu", c.nu},
                   {"scaling_only", c.scaling_only}};
  if (c.K) j["K"] = *c.K;
  if (c.a) j["a"] = *c.a;
  if (c.b) j["b"] = *c.b;
  if (c.hess_L) j["hess_L"] = *c.hess_L;
  return j;
}

nlohmann::json to_json(const FlowReport& r) {
  return {{"T", r.T},
          {"nu_hat", r.nu_hat},
          {"worst_probe_id", r.worst_probe_id},
          {"decay_check_margin", r.decay_check_margin},
          {"method", r.method},
          {"n_quad", r.time_quadrature.nodes.size()},
          {"ratios", vec_json(r.ratios)}};
}

CsvTable trajectory_table(const Trajectory& tr) {
  CsvTable t;
  t.header.push_back("t");
  for (int k = 0; k < tr.d; ++k) t.header.push_back("x" + std::to_string(k));
  for (int k = 0; k < tr.d; ++k) t.header.push_back("v" + std::to_string(k));
  t.header.push_back("kind");
  for (std::size_t i = 0; i < tr.size(); ++i) {
    std::vector<std::string> r;
    r.push_back(fmt_num(tr.t[i]));
    for (int k = 0; k < tr.d; ++k) r.push_back(fmt_num(tr.x[i * static_cast<std::size_t>(tr.d) + static_cast<std::size_t>(k)]));
    for (int k = 0; k < tr.d; ++k) r.push_back(fmt_num(tr.v[i * static_cast<std::size_t>(tr.d) + static_cast<std::size_t>(k)]));
    r.push_back(event_kind_name(tr.kind[i]));
    t.add(std::move(r));
  }
  return t;
}

namespace {

template <class T>
void put_le(std::string& out, T value) {
  auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  out.append(reinterpret_cast<const char*>(bits.data()), bits.size());
}

template <class T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error("IoError", "truncated event log");
  std::array<unsigned char, sizeof(T)> bits;
  std::memcpy(bits.data(), in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  pos += sizeof(T);
  return std::bit_cast<T>(bits);
}

}  // namespace

std::string encode_event_log(const Trajectory& tr) {
  std::string out = "LLEV";
  put_le<std::uint32_t>(out, 1);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tr.d));
  put_le<std::uint64_t>(out, tr.size());
  const std::size_t d = static_cast<std::size_t>(tr.d);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    put_le<double>(out, tr.t[i]);
    for (std::size_t k = 0; k < d; ++k) put_le<double>(out, tr.x[i * d + k]);
    for (std::size_t k = 0; k < d; ++k) put_le<double>(out, tr.v[i * d + k]);
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(tr.kind[i]));
  }
  return out;
}

Trajectory decode_event_log(const std::string& bytes) {
  if (bytes.size() < 20 || bytes.compare(0, 4, "LLEV") != 0) throw Error("IoError", "not an event log");
  std::size_t pos = 4;
  auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != 1) throw Error("IoError", "unsupported event log version");
  Trajectory tr;
  tr.d = static_cast<int>(get_le<std::uint32_t>(bytes, pos));
  auto n = get_le<std::uint64_t>(bytes, pos);
  const std::size_t d = static_cast<std::size_t>(tr.d);
  for (std::uint64_t i = 0; i < n; ++i) {
    tr.t.push_back(get_le<double>(bytes, pos));
    for (std::size_t k = 0; k < d; ++k) tr.x.push_back(get_le<double>(bytes, pos));
    for (std::size_t k = 0; k < d; ++k) tr.v.push_back(get_le<double>(bytes, pos));
    auto kind = get_le<std::uint8_t>(bytes, pos);
    if (kind > static_cast<std::uint8_t>(EventKind::End)) throw Error("IoError", "bad event kind");
    tr.kind.push_back(static_cast<EventKind>(kind));
  }
  if (!tr.t.empty()) tr.t_end = tr.t.back();
  return tr;
}

}  // namespace liftlab
