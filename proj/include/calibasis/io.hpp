#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "calibasis/emulator.hpp"

namespace calibasis::io {

namespace fs = std::filesystem;

// %.17g, so that writing then reading reproduces every bit.
std::string format_double(double x);

// Row-major, comma-separated, no header. Throws ParseError with file and line.
Matrix read_csv(const fs::path& path);
void write_csv(const fs::path& path, const Matrix& m);

// Accepts a single row or a single column.
Vector read_vector_csv(const fs::path& path);
// One value per line.
void write_vector_csv(const fs::path& path, const Vector& v);

// Diagonal weights are stored as a vector file, dense ones as a square matrix.
WeightMatrix read_weight(const fs::path& path, WeightMatrix::Form form);
void write_weight(const fs::path& path, const WeightMatrix& w);

WeightMatrix::Form parse_weight_form(const std::string& name);

nlohmann::json gp_spec_to_json(const GpSpec& spec);
// Missing keys keep their defaults; unknown values throw InvalidConfig.
GpSpec gp_spec_from_json(const nlohmann::json& j);

// Emulator bundle: emulator.json plus CSV files in one directory.
void save_emulator(const fs::path& dir, const FieldEmulator& em);
FieldEmulator load_emulator(const fs::path& dir);

}  // namespace calibasis::io
