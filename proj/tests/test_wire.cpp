#include <doctest.h>

#include <vector>

#include "ccrec/model.hpp"
#include "ccrec/rng.hpp"
#include "ccrec/sparsity.hpp"
#include "ccrec/wire.hpp"

using namespace ccrec;

TEST_CASE("sparse vector layout is bit-exact")
{
    SUBCASE("d=8 with nonzeros at indices 1 and 5")
    {
        std::vector<float> v(8, 0.0f);
        v[1] = 1.5f;
        v[5] = -2.25f;
        const Bytes bytes = encode_sparse(v);
        REQUIRE(bytes.size() == 17);
        CHECK(bytes[0] == 8);  // dimension
        CHECK(bytes[4] == 2);  // value count
        CHECK(bytes[8] == 0x22); // 0b00100010
        CHECK(decode_sparse(bytes) == v);
    }
    SUBCASE("zero vector of dimension 8")
    {
        const std::vector<float> v(8, 0.0f);
        const Bytes bytes = encode_sparse(v);
        CHECK(bytes.size() == 9);
        CHECK(decode_sparse(bytes) == v);
    }
    SUBCASE("d=10000 at 10% density beats dense by at least 7.5x")
    {
        CHECK(sparse_encoded_size(10000, 1000) == 5258);
        CHECK(dense_encoded_size(10000) == 40008);
        CHECK(static_cast<double>(dense_encoded_size(10000)) /
                  static_cast<double>(sparse_encoded_size(10000, 1000)) >=
              7.5);
    }
}

TEST_CASE("sparse round trip is exact over random vectors")
{
    Rng rng(404);
    for (int trial = 0; trial < 300; ++trial)
    {
        const std::size_t d = rng.index(2000);
        std::vector<float> v(d, 0.0f);
        for (std::size_t i = 0; i < d; ++i)
        {
            if (rng.chance(0.15))
            {
                v[i] = static_cast<float>(rng.uniform(-10, 10));
            }
        }
        const Bytes bytes = encode_sparse(v);
        std::size_t nnz = 0;
        for (float x : v)
        {
            nnz += (x != 0.0f);
        }
        CHECK(bytes.size() == sparse_encoded_size(d, nnz));
        CHECK(decode_sparse(bytes) == v);
        CHECK(encode_sparse(decode_sparse(bytes)) == bytes);
    }
}

TEST_CASE("sparse decode rejects malformed payloads")
{
    std::vector<float> v(16, 0.0f);
    v[3] = 4.0f;
    const Bytes good = encode_sparse(v);

    SUBCASE("empty payload")
    {
        CHECK_THROWS_AS(decode_sparse(Bytes{}), WireError);
    }
    SUBCASE("truncated values")
    {
        Bytes bad(good.begin(), good.end() - 2);
        CHECK_THROWS_AS(decode_sparse(bad), WireError);
    }
    SUBCASE("trailing bytes")
    {
        Bytes bad = good;
        bad.push_back(0);
        CHECK_THROWS_AS(decode_sparse(bad), WireError);
    }
    SUBCASE("popcount mismatch")
    {
        Bytes bad = good;
        bad[8] |= 0x01; // extra support bit without a value
        CHECK_THROWS_AS(decode_sparse(bad), WireError);
    }
    SUBCASE("bits beyond the dimension")
    {
        std::vector<float> v5(5, 0.0f);
        v5[0] = 1.0f;
        Bytes bad = encode_sparse(v5);
        bad[8] |= 0x80; // index 7 >= d = 5
        CHECK_THROWS_AS(decode_sparse(bad), WireError);
    }
    SUBCASE("non-finite input is rejected at encode time")
    {
        std::vector<float> nan_vec(4, 0.0f);
        nan_vec[1] = std::numeric_limits<float>::quiet_NaN();
        CHECK_THROWS_AS(encode_sparse(nan_vec), std::invalid_argument);
    }
}

namespace
{
    ModelConfig small_config()
    {
        ModelConfig cfg;
        cfg.vocab_size = 40;
        cfg.embedding_dim = 8;
        cfg.hidden_dim = 12;
        return cfg;
    }

    std::size_t raw_dense_bytes(const RecModel& model)
    {
        std::size_t n = 0;
        for (const ParamTensor* p : model.params())
        {
            n += 4 * p->size();
        }
        return n;
    }
}

TEST_CASE("model payload round-trips and re-encodes identically")
{
    RecModel model(small_config(), 77);
    const Bytes bytes = encode_model(model);
    const RecModel decoded = decode_model(bytes);
    CHECK(decoded.config() == model.config());
    CHECK(encode_model(decoded) == bytes);

    // decoded values are the f32-rounded originals
    const auto original = model.params();
    const auto loaded = decoded.params();
    REQUIRE(original.size() == loaded.size());
    for (std::size_t k = 0; k < original.size(); ++k)
    {
        REQUIRE(original[k]->size() == loaded[k]->size());
        for (std::size_t i = 0; i < original[k]->size(); ++i)
        {
            CHECK(loaded[k]->values[i] ==
                  static_cast<double>(static_cast<float>(original[k]->values[i])));
        }
    }
}

TEST_CASE("an unpruned model encodes within 4 percent of raw dense floats")
{
    RecModel model(small_config(), 78);
    const Bytes bytes = encode_model(model);
    CHECK(static_cast<double>(bytes.size()) <=
          1.04 * static_cast<double>(raw_dense_bytes(model)));
}

TEST_CASE("a 90 percent pruned model encodes at most one seventh of its dense payload")
{
    RecModel model(small_config(), 79);
    const Bytes dense = encode_model(model);
    auto prunable = model.prunable_params();
    apply_magnitude_prune(prunable, 0.9);
    const Bytes pruned = encode_model(model);
    CHECK(static_cast<double>(pruned.size()) <= static_cast<double>(dense.size()) / 7.0);
}

TEST_CASE("pruned masks survive the round trip")
{
    RecModel model(small_config(), 80);
    auto prunable = model.prunable_params();
    apply_magnitude_prune(prunable, 0.5);
    const RecModel decoded = decode_model(encode_model(model));
    const auto a = model.params();
    const auto b = decoded.params();
    for (std::size_t k = 0; k < a.size(); ++k)
    {
        CHECK(a[k]->mask == b[k]->mask);
    }
}

TEST_CASE("model decode rejects corruption")
{
    RecModel model(small_config(), 81);
    Bytes bytes = encode_model(model);

    SUBCASE("bad magic")
    {
        bytes[0] = 'X';
        CHECK_THROWS_AS(decode_model(bytes), WireError);
    }
    SUBCASE("truncation")
    {
        bytes.resize(bytes.size() / 2);
        CHECK_THROWS_AS(decode_model(bytes), WireError);
    }
    SUBCASE("trailing garbage")
    {
        bytes.push_back(0xff);
        CHECK_THROWS_AS(decode_model(bytes), WireError);
    }
}
