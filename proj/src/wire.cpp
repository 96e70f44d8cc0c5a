#include "ccrec/wire.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "ccrec/model.hpp"

namespace ccrec
{
    void ByteWriter::u16(std::uint16_t v)
    {
        m_bytes.push_back(static_cast<std::uint8_t>(v & 0xff));
        m_bytes.push_back(static_cast<std::uint8_t>(v >> 8));
    }

    void ByteWriter::u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i)
        {
            m_bytes.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
        }
    }

    void ByteWriter::u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i)
        {
            m_bytes.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
        }
    }

    void ByteWriter::f32(float v)
    {
        u32(std::bit_cast<std::uint32_t>(v));
    }

    void ByteWriter::f64(double v)
    {
        u64(std::bit_cast<std::uint64_t>(v));
    }

    void ByteWriter::raw(std::span<const std::uint8_t> bytes)
    {
        m_bytes.insert(m_bytes.end(), bytes.begin(), bytes.end());
    }

    void ByteWriter::str(std::string_view s)
    {
        if (s.size() > std::numeric_limits<std::uint16_t>::max())
        {
            throw std::invalid_argument("ByteWriter::str: string too long");
        }
        u16(static_cast<std::uint16_t>(s.size()));
        raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()),
                                          s.size()));
    }

    void ByteReader::need(std::size_t n) const
    {
        if (m_offset + n > m_bytes.size())
        {
            throw WireError(m_bytes.size(), "truncated: need " + std::to_string(n) +
                                                " more bytes at offset " +
                                                std::to_string(m_offset));
        }
    }

    std::uint8_t ByteReader::u8()
    {
        need(1);
        return m_bytes[m_offset++];
    }

    std::uint16_t ByteReader::u16()
    {
        need(2);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i)
        {
            v = static_cast<std::uint16_t>(v | (static_cast<std::uint16_t>(m_bytes[m_offset++])
                                                << (8 * i)));
        }
        return v;
    }

    std::uint32_t ByteReader::u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
        {
            v |= static_cast<std::uint32_t>(m_bytes[m_offset++]) << (8 * i);
        }
        return v;
    }

    std::uint64_t ByteReader::u64()
    {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
        {
            v |= static_cast<std::uint64_t>(m_bytes[m_offset++]) << (8 * i);
        }
        return v;
    }

    float ByteReader::f32()
    {
        return std::bit_cast<float>(u32());
    }

    double ByteReader::f64()
    {
        return std::bit_cast<double>(u64());
    }

    std::string ByteReader::str()
    {
        const std::uint16_t n = u16();
        need(n);
        std::string s(reinterpret_cast<const char*>(m_bytes.data() + m_offset), n);
        m_offset += n;
        return s;
    }

    std::span<const std::uint8_t> ByteReader::raw(std::size_t n)
    {
        need(n);
        auto out = m_bytes.subspan(m_offset, n);
        m_offset += n;
        return out;
    }

    void ByteReader::expect_exhausted() const
    {
        if (m_offset != m_bytes.size())
        {
            throw WireError(m_offset, "trailing bytes after payload");
        }
    }

    void encode_sparse(ByteWriter& out, std::span<const float> v)
    {
        if (v.size() > std::numeric_limits<std::uint32_t>::max())
        {
            throw std::invalid_argument("encode_sparse: dimension exceeds u32");
        }
        for (float x : v)
        {
            if (!std::isfinite(x))
            {
                throw std::invalid_argument("encode_sparse: entries must be finite");
            }
        }
        const auto d = static_cast<std::uint32_t>(v.size());
        std::uint32_t nnz = 0;
        for (float x : v)
        {
            nnz += (x != 0.0f);
        }
        out.u32(d);
        out.u32(nnz);
        const std::size_t bitmap_len = (v.size() + 7) / 8;
        std::vector<std::uint8_t> bitmap(bitmap_len, 0);
        for (std::size_t i = 0; i < v.size(); ++i)
        {
            if (v[i] != 0.0f)
            {
                bitmap[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
            }
        }
        out.raw(bitmap);
        for (float x : v)
        {
            if (x != 0.0f)
            {
                out.f32(x);
            }
        }
    }

    Bytes encode_sparse(std::span<const float> v)
    {
        ByteWriter out;
        encode_sparse(out, v);
        return out.take();
    }

    std::vector<float> decode_sparse(ByteReader& in)
    {
        const std::uint32_t d = in.u32();
        const std::uint32_t declared = in.u32();
        const std::size_t bitmap_len = (static_cast<std::size_t>(d) + 7) / 8;
        const auto bitmap = in.raw(bitmap_len);
        std::uint32_t popcount = 0;
        for (std::size_t j = 0; j < bitmap_len; ++j)
        {
            std::uint8_t byte = bitmap[j];
            // bits addressing indices >= d must be clear
            if (j + 1 == bitmap_len && d % 8 != 0)
            {
                const std::uint8_t valid = static_cast<std::uint8_t>((1u << (d % 8)) - 1);
                if (byte & static_cast<std::uint8_t>(~valid))
                {
                    throw WireError(in.offset() - bitmap_len + j,
                                    "bitmap sets bits beyond the declared dimension");
                }
            }
            popcount += static_cast<std::uint32_t>(std::popcount(byte));
        }
        if (popcount != declared)
        {
            throw WireError(8, "bitmap popcount " + std::to_string(popcount) +
                                   " does not match declared value count " +
                                   std::to_string(declared));
        }
        std::vector<float> out(d, 0.0f);
        for (std::size_t i = 0; i < d; ++i)
        {
            if (bitmap[i / 8] & (1u << (i % 8)))
            {
                const float x = in.f32();
                if (x == 0.0f)
                {
                    throw WireError(in.offset() - 4, "stored value must be nonzero");
                }
                out[i] = x;
            }
        }
        return out;
    }

    std::vector<float> decode_sparse(std::span<const std::uint8_t> bytes)
    {
        ByteReader in(bytes);
        auto out = decode_sparse(in);
        in.expect_exhausted();
        return out;
    }

    namespace
    {
        constexpr std::uint8_t kMagic[4] = {'C', 'C', 'R', 'M'};
        constexpr std::uint16_t kVersion = 1;

        std::vector<float> masked_f32(const ParamTensor& p)
        {
            std::vector<float> out(p.size());
            for (std::size_t i = 0; i < p.size(); ++i)
            {
                out[i] = static_cast<float>(p.at(i));
            }
            return out;
        }
    }

    Bytes encode_model(const RecModel& model)
    {
        const ModelConfig& cfg = model.config();
        ByteWriter out;
        out.raw(kMagic);
        out.u16(kVersion);
        out.u8(static_cast<std::uint8_t>(cfg.mode));
        out.u32(static_cast<std::uint32_t>(cfg.vocab_size));
        out.u32(static_cast<std::uint32_t>(cfg.embedding_dim));
        out.u32(static_cast<std::uint32_t>(cfg.gru_layers));
        out.u32(static_cast<std::uint32_t>(cfg.hidden_dim));
        out.u32(static_cast<std::uint32_t>(cfg.batch_size));
        out.f64(cfg.lasso.gamma);
        out.f64(cfg.lasso.lambda);
        out.u8(cfg.lasso.target_sparsity.has_value() ? 1 : 0);
        out.f64(cfg.lasso.target_sparsity.value_or(0.0));
        out.u8(cfg.prune_embedding ? 1 : 0);

        const auto tensors = model.params();
        out.u32(static_cast<std::uint32_t>(tensors.size()));
        for (const ParamTensor* p : tensors)
        {
            out.str(p->name);
            out.u8(static_cast<std::uint8_t>(p->shape.size()));
            for (std::size_t d : p->shape)
            {
                out.u32(static_cast<std::uint32_t>(d));
            }
            out.u8(p->prunable ? 1 : 0);
            encode_sparse(out, masked_f32(*p));
        }
        return out.take();
    }

    RecModel decode_model(std::span<const std::uint8_t> bytes)
    {
        ByteReader in(bytes);
        const auto magic = in.raw(4);
        if (!std::equal(magic.begin(), magic.end(), kMagic))
        {
            throw WireError(0, "bad model magic");
        }
        if (in.u16() != kVersion)
        {
            throw WireError(4, "unsupported model version");
        }
        ModelConfig cfg;
        cfg.mode = static_cast<Mode>(in.u8());
        cfg.vocab_size = in.u32();
        cfg.embedding_dim = in.u32();
        cfg.gru_layers = in.u32();
        cfg.hidden_dim = in.u32();
        cfg.batch_size = in.u32();
        cfg.lasso.gamma = in.f64();
        cfg.lasso.lambda = in.f64();
        const bool has_target = in.u8() != 0;
        const double target = in.f64();
        if (has_target)
        {
            cfg.lasso.target_sparsity = target;
        }
        cfg.prune_embedding = in.u8() != 0;

        RecModel model(cfg, 0);
        auto tensors = model.params();
        const std::uint32_t count = in.u32();
        if (count != tensors.size())
        {
            throw WireError(in.offset(), "tensor count does not match the declared architecture");
        }
        for (ParamTensor* p : tensors)
        {
            const std::string name = in.str();
            if (name != p->name)
            {
                throw WireError(in.offset(), "unexpected tensor '" + name + "' (expected '" +
                                                 p->name + "')");
            }
            const std::uint8_t rank = in.u8();
            if (rank != p->shape.size())
            {
                throw WireError(in.offset(), "tensor '" + name + "' rank mismatch");
            }
            for (std::size_t d : p->shape)
            {
                if (in.u32() != d)
                {
                    throw WireError(in.offset(), "tensor '" + name + "' dimension mismatch");
                }
            }
            const bool prunable = in.u8() != 0;
            if (prunable != p->prunable)
            {
                throw WireError(in.offset(), "tensor '" + name + "' prunable flag mismatch");
            }
            const std::vector<float> values = decode_sparse(in);
            if (values.size() != p->size())
            {
                throw WireError(in.offset(), "tensor '" + name + "' size mismatch");
            }
            for (std::size_t i = 0; i < values.size(); ++i)
            {
                p->values[i] = static_cast<double>(values[i]);
                // a prunable weight stored as zero is a pruned weight
                p->mask[i] = (!p->prunable || values[i] != 0.0f) ? 1 : 0;
                p->grad[i] = 0.0;
            }
        }
        in.expect_exhausted();
        return model;
    }
}
