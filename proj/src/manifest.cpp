#include "wigait/manifest.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace wigait {

namespace {

std::string hex(const unsigned char* d, unsigned n) {
    static const char* digits = "0123456789abcdef";
    std::string out(2 * n, '0');
    for (unsigned i = 0; i < n; ++i) {
        out[2 * i] = digits[d[i] >> 4];
        out[2 * i + 1] = digits[d[i] & 0xf];
    }
    return out;
}

}  // namespace

std::string sha256_bytes(const void* data, std::size_t n) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    check(ctx != nullptr, "sha256: EVP context allocation failed");
    bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) &&
              EVP_DigestUpdate(ctx, data, n) && EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    check(ok, "sha256: digest computation failed");
    return hex(md, len);
}

std::string sha256_file(const std::string& path) {
    std::string bytes = read_file(path);
    return sha256_bytes(bytes.data(), bytes.size());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void atomic_write(const std::string& path, const std::string& contents) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        check(out.good(), "cannot write " + tmp);
        out.write(contents.data(), std::streamsize(contents.size()));
        check(out.good(), "write failed for " + tmp);
    }
    check(std::rename(tmp.c_str(), path.c_str()) == 0,
          "rename failed for " + path);
}

void RunManifest::add_input(const std::string& path) {
    inputs.emplace_back(path, sha256_file(path));
}

void RunManifest::add_output(const std::string& path) {
    outputs.emplace_back(path, sha256_file(path));
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json j;
    j["tool"] = tool;
    j["command"] = command;
    j["seed"] = seed;
    j["config"] = config_text;
    auto pairs = [](const std::vector<std::pair<std::string, std::string>>& v) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& [p, d] : v) arr.push_back({{"path", p}, {"sha256", d}});
        return arr;
    };
    j["inputs"] = pairs(inputs);
    j["outputs"] = pairs(outputs);
    return j;
}

void RunManifest::write(const std::string& out_dir) const {
    // Store paths relative to the manifest so the artifact tree can be moved
    // (and so reruns into different directories produce identical manifests).
    RunManifest rel = *this;
    auto relativize = [&out_dir](std::vector<std::pair<std::string, std::string>>& v) {
        for (auto& [p, digest] : v) {
            std::filesystem::path prox =
                std::filesystem::path(p).lexically_proximate(out_dir);
            if (!prox.empty()) p = prox.generic_string();
        }
    };
    relativize(rel.inputs);
    relativize(rel.outputs);
    atomic_write(out_dir + "/manifest.json", rel.to_json().dump(2) + "\n");
}

void RunManifest::verify(const std::string& manifest_path) {
    nlohmann::json j = nlohmann::json::parse(read_file(manifest_path));
    const std::filesystem::path base =
        std::filesystem::path(manifest_path).parent_path();
    for (const char* kind : {"inputs", "outputs"}) {
        for (const auto& entry : j.at(kind)) {
            std::string path = entry.at("path");
            std::string want = entry.at("sha256");
            std::filesystem::path full(path);
            if (full.is_relative()) full = base / full;
            std::string got = sha256_file(full.string());
            check(got == want, std::string("manifest digest mismatch for ") + path);
        }
    }
}

}  // namespace wigait
