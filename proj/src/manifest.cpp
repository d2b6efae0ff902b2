#include "skit/manifest.hpp"

#include "skit/textio.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace skit {

std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return fnv1a_hex(buf.str());
}

std::string RunManifest::text() const {
    std::ostringstream out;
    out << "[manifest]\n";
    out << "tool = " << kToolVersion << "\n";
    out << "subcommand = " << subcommand << "\n";
    out << "seed = " << seed << "\n";
    out << "\n[inputs]\n";
    for (const auto& [path, hash] : inputs) out << hash << "  " << path << "\n";
    out << "\n[config]\n";
    for (const auto& [key, value] : config) out << key << " = " << value << "\n";
    out << "\n[timings_ms]\n";
    for (const auto& [key, value] : timings_ms) out << key << " = " << fmt_double(value, 6) << "\n";
    return out.str();
}

void RunManifest::write(const std::string& out_dir) const {
    write_file(out_dir + "/manifest.txt", text());
}

void write_file(const std::string& path, const std::string& content) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
}

} // namespace skit
