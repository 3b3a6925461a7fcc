#pragma once

// CSV writers, content hashes and the per-run output directory.

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace sdrift::io {

// 17 significant digits, scientific, '.' decimal regardless of locale.
std::string format_sci(double v);

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    void row(std::span<const double> values);
    void row(std::initializer_list<double> values) { row(std::span<const double>(values.begin(), values.size())); }
    // Leading text column followed by numbers.
    void row(const std::string& label, std::span<const double> values);

private:
    std::ofstream out_;
    std::size_t columns_;
};

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

// One directory per run. Files are registered as they are written and
// listed with their SHA-256 in manifest.json.
class RunDirectory {
public:
    explicit RunDirectory(std::string dir);
    const std::string& dir() const { return dir_; }
    // Full path of a file in the run directory; registers it for the manifest.
    std::string file(const std::string& name);
    void write_text(const std::string& name, const std::string& text);
    void write_manifest(const std::string& command, const std::string& config_hash, std::uint64_t seed,
                        int exit_code);

private:
    std::string dir_;
    std::vector<std::string> files_;
};

}  // namespace sdrift::io
