#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <ctime>
#include <sstream>
#include <string>
#include <vector>

namespace difflab {

namespace detail {

// Compact SHA-1, enough for content-addressing config snapshots.
class Sha1 {
public:
    Sha1() { reset(); }

    void update(const unsigned char* data, std::size_t len) {
        total_ += len;
        while (len > 0) {
            const std::size_t take = std::min<std::size_t>(64 - fill_, len);
            std::memcpy(block_.data() + fill_, data, take);
            fill_ += take;
            data += take;
            len -= take;
            if (fill_ == 64) {
                process();
                fill_ = 0;
            }
        }
    }

    std::string hex_digest() {
        const std::uint64_t bits = total_ * 8;
        unsigned char pad = 0x80;
        update(&pad, 1);
        unsigned char zero = 0x00;
        while (fill_ != 56) update(&zero, 1);
        unsigned char len_be[8];
        for (int i = 0; i < 8; ++i) len_be[i] = static_cast<unsigned char>(bits >> (56 - 8 * i));
        update(len_be, 8);
        static const char* digits = "0123456789abcdef";
        std::string out;
        out.reserve(40);
        for (std::uint32_t w : h_) {
            for (int i = 28; i >= 0; i -= 4) out.push_back(digits[(w >> i) & 0xF]);
        }
        return out;
    }

private:
    void reset() {
        h_ = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u};
        fill_ = 0;
        total_ = 0;
    }

    static std::uint32_t rol(std::uint32_t v, int s) { return (v << s) | (v >> (32 - s)); }

    void process() {
        std::uint32_t w[80];
        for (int i = 0; i < 16; ++i) {
            w[i] = (std::uint32_t(block_[4 * i]) << 24) | (std::uint32_t(block_[4 * i + 1]) << 16) |
                   (std::uint32_t(block_[4 * i + 2]) << 8) | std::uint32_t(block_[4 * i + 3]);
        }
        for (int i = 16; i < 80; ++i) w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
        std::uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4];
        for (int i = 0; i < 80; ++i) {
            std::uint32_t f, k;
            if (i < 20) {
                f = (b & c) | ((~b) & d);
                k = 0x5A827999u;
            } else if (i < 40) {
                f = b ^ c ^ d;
                k = 0x6ED9EBA1u;
            } else if (i < 60) {
                f = (b & c) | (b & d) | (c & d);
                k = 0x8F1BBCDCu;
            } else {
                f = b ^ c ^ d;
                k = 0xCA62C1D6u;
            }
            const std::uint32_t tmp = rol(a, 5) + f + e + k + w[i];
            e = d;
            d = c;
            c = rol(b, 30);
            b = a;
            a = tmp;
        }
        h_[0] += a;
        h_[1] += b;
        h_[2] += c;
        h_[3] += d;
        h_[4] += e;
    }

    std::array<std::uint32_t, 5> h_{};
    std::array<unsigned char, 64> block_{};
    std::size_t fill_ = 0;
    std::uint64_t total_ = 0;
};

}  // namespace detail

/// Content hash in blob form: sha1("blob <len>\0" + content).
inline std::string content_hash(const std::string& content) {
    detail::Sha1 sha;
    const std::string header = "blob " + std::to_string(content.size()) + '\0';
    sha.update(reinterpret_cast<const unsigned char*>(header.data()), header.size());
    sha.update(reinterpret_cast<const unsigned char*>(content.data()), content.size());
    return sha.hex_digest();
}

/// Record of a run: config snapshot, its hash, wall-clock stamp and the files
/// written. Feeding the snapshot back as the config reproduces every numeric
/// output; the timestamp is informational only.
struct RunManifest {
    std::string command;
    std::string config_snapshot;
    std::string config_hash;
    std::string timestamp;
    std::vector<std::string> outputs;

    static std::string now_utc() {
        std::time_t t = std::time(nullptr);
        char buf[32];
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
        return buf;
    }

    std::string to_text() const {
        std::ostringstream os;
        os << "command = " << command << "\n";
        os << "config_hash = " << config_hash << "\n";
        os << "timestamp = " << timestamp << "\n";
        for (const auto& o : outputs) os << "output = " << o << "\n";
        os << "\n# --- config snapshot ---\n" << config_snapshot;
        return os.str();
    }
};

inline RunManifest make_manifest(const std::string& command, const std::string& config_snapshot,
                                 std::vector<std::string> outputs) {
    RunManifest m;
    m.command = command;
    m.config_snapshot = config_snapshot;
    m.config_hash = content_hash(config_snapshot);
    m.timestamp = RunManifest::now_utc();
    m.outputs = std::move(outputs);
    return m;
}

}  // namespace difflab
