#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "blockfill/datagen.hpp"
#include "blockfill/erm.hpp"
#include "blockfill/risk.hpp"
#include "blockfill/types.hpp"

namespace blockfill::io {

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

/// Dense Matrix Market array format, full precision, column-major values.
void write_matrix_market(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_market(const std::filesystem::path& path);

/// One value per line; a plain single-column CSV.
void write_csv_vector(const std::filesystem::path& path, const Vector& v);
Vector read_csv_vector(const std::filesystem::path& path);

/// CSV table with a header row; cells are preformatted strings.
void write_csv_table(const std::filesystem::path& path,
                     const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows);

std::string format_double(double v);

/// FNV-1a over a string; used to fingerprint canonical JSON.
std::string content_hash(const std::string& payload);

/// Instance bundle: manifest.json + Fstar/Gstar in Matrix Market array
/// format + the four marginals as CSV vectors.
void save_instance(const std::filesystem::path& dir,
                   const datagen::GroundTruthInstance& inst,
                   const datagen::KappaReport& kappas);
datagen::GroundTruthInstance load_instance(const std::filesystem::path& dir);

/// Canonical manifest text (no timestamps); its hash is embedded on save.
std::string instance_manifest_json(const datagen::GroundTruthInstance& inst,
                                   const datagen::KappaReport& kappas);

/// Embedding pair: F.mtx + G.mtx + meta.json (rank, seed, config hash).
void save_embeddings(const std::filesystem::path& dir,
                     const erm::EmbeddingPair& pair, std::uint64_t seed,
                     const std::string& config_hash);
erm::EmbeddingPair load_embeddings(const std::filesystem::path& dir);

/// Deterministic trace serialization; wall-clock timings are deliberately
/// excluded so identical runs produce identical bytes.
std::string trace_json(const erm::DiagnosticsTrace& trace);

std::string risk_report_json(const risk::RiskReport& report);

/// Minimal structural validation of a serialized risk report against the
/// published schema (docs/riskreport.schema.json): required keys, types.
bool validate_risk_report_json(const std::string& payload, std::string* why);

}  // namespace blockfill::io
