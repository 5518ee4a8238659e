#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace ner {

// FIPS 180-4 SHA-256. Corpus fingerprints, run ids and weight checksums are
// all hex digests from this implementation.
class Sha256 {
public:
    Sha256();

    void update(const void* data, std::size_t len);
    void update(std::string_view s) { update(s.data(), s.size()); }

    // Finalizes and returns the 64-char lowercase hex digest. The object must
    // not be updated afterwards.
    std::string hex_digest();

    static std::string of(std::string_view data);

private:
    void process_block(const std::uint8_t* block);

    std::uint32_t state_[8];
    std::uint64_t total_len_ = 0;
    std::uint8_t buffer_[64];
    std::size_t buffer_len_ = 0;
};

}  // namespace ner
