#include "manifest.hpp"

#include "fmrexec_cli/cli.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>
#include <stdexcept>

#ifndef FMREXEC_VERSION
#define FMREXEC_VERSION "unknown"
#endif

namespace fmrexec::cli {

std::string sha256_hex(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 init failed");
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xF]);
    }
    return out;
}

Manifest::Manifest(std::string command, std::filesystem::path out_dir, nlohmann::json config, std::uint64_t seed)
    : command_(std::move(command)),
      out_(std::move(out_dir)),
      config_(std::move(config)),
      seed_(seed),
      start_(std::chrono::steady_clock::now()) {}

void Manifest::add(const std::string& file) { files_.push_back(file); }

void Manifest::write(const std::string& status) {
    nlohmann::json m;
    m["command"] = command_;
    m["version"] = FMREXEC_VERSION;
    m["status"] = status;
    m["output_dir"] = out_.string();
    m["seed"] = seed_;
    m["config"] = config_;
    m["runtime_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    nlohmann::json outputs = nlohmann::json::array();
    for (const auto& f : files_) {
        const auto p = out_ / f;
        nlohmann::json entry{{"file", f}};
        if (std::filesystem::exists(p)) {
            entry["sha256"] = sha256_hex(p);
            entry["bytes"] = std::filesystem::file_size(p);
        }
        outputs.push_back(entry);
    }
    m["outputs"] = outputs;
    std::ofstream os(out_ / "manifest.json", std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write manifest in " + out_.string());
    os << m.dump(2) << '\n';
}

}  // namespace fmrexec::cli
