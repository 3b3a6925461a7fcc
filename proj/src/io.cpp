#include "stabledrift/io.hpp"

#include "stabledrift/errors.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <sstream>

namespace sdrift::io {

namespace fs = std::filesystem;

std::string format_sci(double v) {
    char buf[40];
    // LC_NUMERIC may select a comma
    std::snprintf(buf, sizeof buf, "%.16e", v);
    std::string s(buf);
    std::replace(s.begin(), s.end(), ',', '.');
    return s;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary), columns_(header.size()) {
    if (!out_) throw ConfigError("cannot write " + path);
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
}

void CsvWriter::row(std::span<const double> values) {
    if (values.size() != columns_) throw ConfigError("CSV row width does not match the header");
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_sci(values[i]);
    out_ << '\n';
}

void CsvWriter::row(const std::string& label, std::span<const double> values) {
    if (values.size() + 1 != columns_) throw ConfigError("CSV row width does not match the header");
    out_ << label;
    for (double v : values) out_ << ',' << format_sci(v);
    out_ << '\n';
}

namespace {

std::string digest_hex(EVP_MD_CTX* ctx) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int n = 0;
    EVP_DigestFinal_ex(ctx, md, &n);
    std::string hex;
    char b[3];
    for (unsigned int i = 0; i < n; ++i) {
        std::snprintf(b, sizeof b, "%02x", md[i]);
        hex += b;
    }
    return hex;
}

using Ctx = std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)>;

Ctx sha256_ctx() {
    Ctx c(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!c || EVP_DigestInit_ex(c.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 unavailable");
    return c;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
    auto c = sha256_ctx();
    EVP_DigestUpdate(c.get(), bytes.data(), bytes.size());
    return digest_hex(c.get());
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path);
    auto c = sha256_ctx();
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(c.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return digest_hex(c.get());
}

RunDirectory::RunDirectory(std::string dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw ConfigError("cannot create output directory " + dir_);
}

std::string RunDirectory::file(const std::string& name) {
    if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
    return (fs::path(dir_) / name).string();
}

void RunDirectory::write_text(const std::string& name, const std::string& text) {
    std::ofstream o(file(name), std::ios::binary);
    if (!o) throw ConfigError("cannot write " + name + " in " + dir_);
    o << text;
}

void RunDirectory::write_manifest(const std::string& command, const std::string& config_hash, std::uint64_t seed,
                                  int exit_code) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["command"] = command;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["exit_code"] = exit_code;
    j["files"] = nlohmann::json::array();
    for (const auto& f : files_) {
        const auto p = fs::path(dir_) / f;
        if (!fs::exists(p)) continue;
        j["files"].push_back({{"name", f}, {"bytes", fs::file_size(p)}, {"sha256", sha256_file(p.string())}});
    }
    std::ofstream o(fs::path(dir_) / "manifest.json", std::ios::binary);
    if (!o) throw ConfigError("cannot write manifest in " + dir_);
    o << j.dump(2) << '\n';
}

}  // namespace sdrift::io
