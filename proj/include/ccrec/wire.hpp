#pragma once

// Bit-exact wire formats. SparseVectorWire, little-endian throughout:
//   u32 dimension | u32 value_count | bitmap ceil(d/8) | f32 values
// Bit i of bitmap byte j marks index 8*j + i; values are the nonzero
// coordinates in ascending index order. Model payloads serialize a config
// header plus each tensor as a SparseVectorWire over its flattened masked
// values.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccrec
{
    class RecModel;

    using Bytes = std::vector<std::uint8_t>;

    struct WireError : std::runtime_error
    {
        std::size_t offset;
        WireError(std::size_t offset_, const std::string& what)
            : std::runtime_error("offset " + std::to_string(offset_) + ": " + what),
              offset(offset_)
        {
        }
    };

    class ByteWriter
    {
    public:
        void u8(std::uint8_t v) { m_bytes.push_back(v); }
        void u16(std::uint16_t v);
        void u32(std::uint32_t v);
        void u64(std::uint64_t v);
        void f32(float v);
        void f64(double v);
        void raw(std::span<const std::uint8_t> bytes);
        void str(std::string_view s); // u16 length prefix

        Bytes take() { return std::move(m_bytes); }
        std::size_t size() const { return m_bytes.size(); }

    private:
        Bytes m_bytes;
    };

    class ByteReader
    {
    public:
        explicit ByteReader(std::span<const std::uint8_t> bytes) : m_bytes(bytes) {}

        std::uint8_t u8();
        std::uint16_t u16();
        std::uint32_t u32();
        std::uint64_t u64();
        float f32();
        double f64();
        std::string str();
        std::span<const std::uint8_t> raw(std::size_t n);

        std::size_t offset() const { return m_offset; }
        std::size_t remaining() const { return m_bytes.size() - m_offset; }
        void expect_exhausted() const;

    private:
        void need(std::size_t n) const;

        std::span<const std::uint8_t> m_bytes;
        std::size_t m_offset = 0;
    };

    Bytes encode_sparse(std::span<const float> v);
    std::vector<float> decode_sparse(std::span<const std::uint8_t> bytes);
    // Stream variants for embedding in larger payloads.
    void encode_sparse(ByteWriter& out, std::span<const float> v);
    std::vector<float> decode_sparse(ByteReader& in);

    constexpr std::size_t sparse_encoded_size(std::size_t dimension, std::size_t nonzeros)
    {
        return 8 + (dimension + 7) / 8 + 4 * nonzeros;
    }

    constexpr std::size_t dense_encoded_size(std::size_t dimension)
    {
        return 8 + 4 * dimension;
    }

    Bytes encode_model(const RecModel& model);
    RecModel decode_model(std::span<const std::uint8_t> bytes);
}
