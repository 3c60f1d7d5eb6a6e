#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "agbp/model.hpp"

namespace agbp {

struct FactorClassification;

/// Paths of the two files that make up a model on disk.
struct ModelPaths {
  std::filesystem::path matrix;        // Matrix Market coordinate file (H)
  std::filesystem::path observations;  // CSV `row,z,v`, 0-based rows
};

/// Reads H from a `%%MatrixMarket matrix coordinate real general` stream
/// (`symmetric` is also accepted and expanded). `source` names the stream in
/// error messages. Throws ParseError carrying the offending line number.
std::vector<Entry> read_matrix_market(std::istream& in, const std::string& source,
                                      std::size_t& rows, std::size_t& cols);
void write_matrix_market(std::ostream& out, const LinearModel& model);

LinearModel load_model(const std::filesystem::path& matrix_path,
                       const std::filesystem::path& observations_path);
inline LinearModel load_model(const ModelPaths& paths) {
  return load_model(paths.matrix, paths.observations);
}
void save_model(const LinearModel& model, const ModelPaths& paths);

/// CSV `variable,cluster`, 0-based.
ClusterPartition load_partition(const std::filesystem::path& path, std::size_t variables);
void save_partition(const ClusterPartition& partition, const std::filesystem::path& path);

/// CSV `factor,kind,cluster` for debugging classifications.
void write_classification_csv(std::ostream& out, const FactorClassification& classification);

/// Formats a double with 17 significant digits (round-trip exact).
std::string format_double(double value);

}  // namespace agbp
