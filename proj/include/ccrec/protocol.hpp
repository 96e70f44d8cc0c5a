#pragma once

// Pull/push cooperation between one cloud node and per-user device nodes,
// simulated in-process with deterministic scheduling and exact payload-byte
// accounting. The cloud trains and publishes the global model; devices
// fine-tune and either download candidate item data and score locally
// (pull) or upload sparse user embeddings and receive ranked lists (push).

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccrec/candidates.hpp"
#include "ccrec/data.hpp"
#include "ccrec/experiment.hpp"
#include "ccrec/model.hpp"
#include "ccrec/wire.hpp"

namespace ccrec
{
    enum class MessageKind : std::uint8_t
    {
        GlobalModel,
        CandidateSetItems,
        UserEmbedding,
        RecommendationList,
    };

    const char* kind_name(MessageKind kind);

    inline constexpr std::int64_t kCloudNode = -1;

    struct Message
    {
        MessageKind kind = MessageKind::GlobalModel;
        std::int64_t sender = kCloudNode;
        std::int64_t receiver = kCloudNode;
        Bytes payload;

        std::size_t payload_bytes() const { return payload.size(); }
    };

    struct ProtocolViolation : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    struct MessageRecord
    {
        MessageKind kind;
        std::int64_t sender;
        std::int64_t receiver;
        std::uint64_t bytes;
    };

    struct KindTotals
    {
        std::uint64_t count = 0;
        std::uint64_t bytes = 0;
        bool operator==(const KindTotals&) const = default;
    };

    // Append-only, totally ordered log. deliver() validates that the kind is
    // legal for the active mode and direction, then records the message.
    class MessageLog
    {
    public:
        explicit MessageLog(Mode mode) : m_mode(mode) {}

        // Returns the payload to hand to the receiver.
        Bytes deliver(Message msg);

        Mode mode() const { return m_mode; }
        std::span<const MessageRecord> records() const { return m_records; }
        std::uint64_t uploaded_bytes() const { return m_uploaded; }   // device -> cloud
        std::uint64_t downloaded_bytes() const { return m_downloaded; } // cloud -> device
        const std::map<MessageKind, KindTotals>& by_kind() const { return m_by_kind; }

        // One JSON record per line: {"kind":...,"from":...,"to":...,"bytes":...}
        std::string to_ndjson() const;

    private:
        Mode m_mode;
        std::vector<MessageRecord> m_records;
        std::map<MessageKind, KindTotals> m_by_kind;
        std::uint64_t m_uploaded = 0;
        std::uint64_t m_downloaded = 0;
    };

    struct SimulationConfig
    {
        ModelConfig model; // vocab_size is filled from the split
        TrainConfig train;
        FineTuneConfig fine_tune;
        CandidateSelection candidates;
        std::size_t top_k = 20;
    };

    struct SimulationReport
    {
        Mode mode = Mode::Pull;
        std::uint64_t seed = 0;
        double recall = 0;
        double mrr = 0;
        std::size_t instances = 0;
        std::map<std::int64_t, UserMetrics> per_user;
        std::uint64_t uploaded_bytes = 0;
        std::uint64_t downloaded_bytes = 0;
        std::map<MessageKind, KindTotals> by_kind;
        std::size_t devices = 0;
    };

    SimulationReport run_simulation(const DatasetSplit& split, Mode mode,
                                    const SimulationConfig& cfg, std::uint64_t seed,
                                    MessageLog* log_out = nullptr);

    // Deterministic serialization (includes the config snapshot and seed).
    std::string report_to_json(const SimulationReport& report, const SimulationConfig& cfg);
}
