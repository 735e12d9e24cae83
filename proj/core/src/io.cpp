#include "blockfill/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace blockfill::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& arr) {
  Vector v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Index>(i)] = arr[i].get<double>();
  return v;
}

json inf_to_json(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_matrix_market(const fs::path& path, const Matrix& m) {
  std::ostringstream out;
  out << "%%MatrixMarket matrix array real general\n";
  out << m.rows() << " " << m.cols() << "\n";
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) out << format_double(m(i, j)) << "\n";
  spit(path, out.str());
}

Matrix read_matrix_market(const fs::path& path) {
  std::istringstream in(slurp(path));
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
  if (line.rfind("%%MatrixMarket", 0) != 0)
    throw IoError(path.string() + ": missing MatrixMarket banner");
  {
    std::istringstream banner(line);
    std::string tag, object, format, field, symmetry;
    banner >> tag >> object >> format >> field >> symmetry;
    if (object != "matrix" || format != "array" || field != "real" ||
        symmetry != "general")
      throw IoError(path.string() + ": unsupported MatrixMarket variant: " + line);
  }
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  Index rows = 0, cols = 0;
  {
    std::istringstream dims(line);
    if (!(dims >> rows >> cols) || rows < 0 || cols < 0)
      throw IoError(path.string() + ": bad dimension line");
  }
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      double v;
      if (!(in >> v))
        throw IoError(path.string() + ": truncated value section");
      m(i, j) = v;
    }
  }
  return m;
}

void write_csv_vector(const fs::path& path, const Vector& v) {
  std::ostringstream out;
  for (Index i = 0; i < v.size(); ++i) out << format_double(v[i]) << "\n";
  spit(path, out.str());
}

Vector read_csv_vector(const fs::path& path) {
  std::istringstream in(slurp(path));
  std::vector<double> vals;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    vals.push_back(std::stod(line));
  }
  Vector v(static_cast<Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) v[static_cast<Index>(i)] = vals[i];
  return v;
}

void write_csv_table(const fs::path& path,
                     const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  for (std::size_t i = 0; i < header.size(); ++i)
    out << header[i] << (i + 1 < header.size() ? "," : "");
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw IoError("csv row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i)
      out << row[i] << (i + 1 < row.size() ? "," : "");
    out << "\n";
  }
  spit(path, out.str());
}

std::string content_hash(const std::string& payload) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : payload) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

std::string instance_manifest_json(const datagen::GroundTruthInstance& inst,
                                   const datagen::KappaReport& kappas) {
  json j;
  j["format"] = "blockfill-instance-v1";
  j["n"] = inst.n;
  j["m"] = inst.m;
  j["n1"] = inst.n1;
  j["m1"] = inst.m1;
  j["d"] = inst.d;
  j["kind"] = inst.kind;
  j["gamma"] = inst.gamma;
  j["C"] = inst.C;
  j["seed"] = inst.seed;
  j["B"] = inst.B;
  j["test_on_grid"] = inst.test_on_grid;
  j["train_weights"] = {inst.train_weights[0], inst.train_weights[1],
                        inst.train_weights[2]};
  j["spectrum"] = vector_to_json(inst.spectrum);
  j["kappa"] = {{"trn", inf_to_json(kappas.trn)},
                {"tst", inf_to_json(kappas.tst)},
                {"cov", inf_to_json(kappas.cov)},
                {"apx", inf_to_json(kappas.apx)}};
  return j.dump(2);
}

void save_instance(const fs::path& dir,
                   const datagen::GroundTruthInstance& inst,
                   const datagen::KappaReport& kappas) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string());

  const std::string manifest = instance_manifest_json(inst, kappas);
  json j = json::parse(manifest);
  j["manifest_hash"] = content_hash(manifest);
  spit(dir / "manifest.json", j.dump(2) + "\n");
  write_matrix_market(dir / "Fstar.mtx", inst.Fstar);
  write_matrix_market(dir / "Gstar.mtx", inst.Gstar);
  write_csv_vector(dir / "dx1.csv", inst.dx1);
  write_csv_vector(dir / "dx2.csv", inst.dx2);
  write_csv_vector(dir / "dy1.csv", inst.dy1);
  write_csv_vector(dir / "dy2.csv", inst.dy2);
}

datagen::GroundTruthInstance load_instance(const fs::path& dir) {
  json j;
  try {
    j = json::parse(slurp(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw IoError("bad manifest in " + dir.string() + ": " + e.what());
  }
  datagen::GroundTruthInstance inst;
  try {
    inst.n = j.at("n").get<Index>();
    inst.m = j.at("m").get<Index>();
    inst.n1 = j.at("n1").get<Index>();
    inst.m1 = j.at("m1").get<Index>();
    inst.d = j.at("d").get<Index>();
    inst.kind = j.at("kind").get<std::string>();
    inst.gamma = j.at("gamma").get<double>();
    inst.C = j.at("C").get<double>();
    inst.seed = j.at("seed").get<std::uint64_t>();
    inst.B = j.at("B").get<double>();
    inst.test_on_grid = j.at("test_on_grid").get<bool>();
    const auto& w = j.at("train_weights");
    inst.train_weights = {w.at(0).get<double>(), w.at(1).get<double>(),
                          w.at(2).get<double>()};
    inst.spectrum = vector_from_json(j.at("spectrum"));
  } catch (const json::exception& e) {
    throw IoError("manifest fields missing in " + dir.string() + ": " +
                  e.what());
  }
  inst.Fstar = read_matrix_market(dir / "Fstar.mtx");
  inst.Gstar = read_matrix_market(dir / "Gstar.mtx");
  inst.dx1 = read_csv_vector(dir / "dx1.csv");
  inst.dx2 = read_csv_vector(dir / "dx2.csv");
  inst.dy1 = read_csv_vector(dir / "dy1.csv");
  inst.dy2 = read_csv_vector(dir / "dy2.csv");
  if (inst.Fstar.rows() != inst.n || inst.Gstar.rows() != inst.m ||
      inst.dx1.size() != inst.n || inst.dy1.size() != inst.m)
    throw IoError("inconsistent bundle shapes in " + dir.string());
  return inst;
}

void save_embeddings(const fs::path& dir, const erm::EmbeddingPair& pair,
                     std::uint64_t seed, const std::string& config_hash) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string());
  write_matrix_market(dir / "F.mtx", pair.F);
  write_matrix_market(dir / "G.mtx", pair.G);
  json j;
  j["format"] = "blockfill-embeddings-v1";
  j["rank"] = pair.rank();
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  spit(dir / "meta.json", j.dump(2) + "\n");
}

erm::EmbeddingPair load_embeddings(const fs::path& dir) {
  erm::EmbeddingPair pair;
  pair.F = read_matrix_market(dir / "F.mtx");
  pair.G = read_matrix_market(dir / "G.mtx");
  if (pair.F.cols() != pair.G.cols())
    throw IoError("embedding ranks differ in " + dir.string());
  return pair;
}

std::string trace_json(const erm::DiagnosticsTrace& trace) {
  json j;
  j["format"] = "blockfill-trace-v1";
  j["p"] = trace.p;
  j["r_cut"] = trace.r_cut;
  j["r_hat"] = trace.r_hat;
  j["sigma_cut"] = trace.sigma_cut;
  j["lambda"] = trace.lambda_used;
  j["mu"] = trace.mu_used;
  j["seed"] = trace.seed;
  j["exact_expectation"] = trace.exact_expectation;
  j["stage1_pinned"] = trace.stage1_pinned;
  j["stage1_objectives"] = trace.stage1_objectives;
  j["stage4_objectives"] = trace.stage4_objectives;
  j["stage1_data_loss"] = trace.stage1_data_loss;
  j["stage4_data_loss"] = trace.stage4_data_loss;
  j["cov_spectrum"] = vector_to_json(trace.cov_spectrum);
  j["projection_unique"] = trace.projection_unique;
  j["q_op_norm"] = trace.q_op_norm;
  return j.dump(2);
}

std::string risk_report_json(const risk::RiskReport& r) {
  json j;
  j["format"] = "blockfill-riskreport-v1";
  j["r_train"] = r.r_train;
  j["r_11"] = r.r_11;
  j["r_12"] = r.r_12;
  j["r_21"] = r.r_21;
  j["r_22"] = r.r_22;
  j["r_test"] = r.r_test;
  j["delta0"] = inf_to_json(r.delta0);
  j["delta1"] = inf_to_json(r.delta1);
  j["k_used"] = r.k_used;
  j["sigma_r_fg"] = r.sigma_r_fg;
  j["tails"] = {{"tail1_k", r.tail1_k},
                {"tail2_k", r.tail2_k},
                {"tail1_r", r.tail1_r},
                {"tail2_r", r.tail2_r}};
  j["alpha"] = r.alpha;
  j["alpha_conditioned"] = r.alpha_conditioned;
  j["conditioning_degenerate"] = r.conditioning_degenerate;
  if (r.good_spectral_event) {
    json ev;
    ev["holds"] = r.good_spectral_event->holds;
    json checks = json::array();
    for (std::size_t i = 0; i < r.good_spectral_event->checks.size(); ++i)
      checks.push_back({{"name", r.good_spectral_event->names[i]},
                        {"ok", r.good_spectral_event->checks[i]}});
    ev["checks"] = checks;
    j["good_spectral_event"] = ev;
  } else {
    j["good_spectral_event"] = nullptr;
  }
  return j.dump(2);
}

bool validate_risk_report_json(const std::string& payload, std::string* why) {
  json j;
  try {
    j = json::parse(payload);
  } catch (const json::exception& e) {
    if (why) *why = std::string("not json: ") + e.what();
    return false;
  }
  const auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  const std::vector<std::string> numbers = {
      "r_train", "r_11", "r_12", "r_21", "r_22",
      "r_test",  "sigma_r_fg", "alpha"};
  for (const auto& key : numbers) {
    if (!j.contains(key)) return fail("missing key: " + key);
    if (!j[key].is_number()) return fail("not a number: " + key);
  }
  for (const std::string key : {"delta0", "delta1"}) {
    if (!j.contains(key)) return fail("missing key: " + key);
    if (!j[key].is_number() && !(j[key].is_string() && j[key] == "inf"))
      return fail("bad value for " + key);
  }
  if (!j.contains("k_used") || !j["k_used"].is_number_integer())
    return fail("missing integer k_used");
  if (!j.contains("alpha_conditioned") || !j["alpha_conditioned"].is_boolean())
    return fail("missing boolean alpha_conditioned");
  if (!j.contains("tails") || !j["tails"].is_object())
    return fail("missing tails object");
  for (const std::string key : {"tail1_k", "tail2_k", "tail1_r", "tail2_r"})
    if (!j["tails"].contains(key) || !j["tails"][key].is_number())
      return fail("missing tails." + key);
  if (!j.contains("good_spectral_event"))
    return fail("missing good_spectral_event");
  return true;
}

}  // namespace blockfill::io
