#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace agentwatch {

enum class MessageKind {
    request_specific,
    request_broad,
    respond,
    respond_broad,
    share,
    accuse,
    skip,
    discussion,
    system,
};

std::string_view to_string(MessageKind kind);
MessageKind message_kind_from_string(std::string_view text);

inline constexpr int kSystemAuthor = -1;

/// Structured fields of the action that produced a message.
struct MessagePayload {
    std::optional<int> target;
    std::optional<std::string> property;
    std::optional<std::string> value;
    std::optional<bool> answer;
    std::vector<int> ids;
    std::optional<double> amount;

    bool operator==(const MessagePayload&) const = default;
};

struct Message {
    int author = kSystemAuthor;
    MessageKind kind = MessageKind::system;
    std::string text;
    MessagePayload payload;

    bool operator==(const Message&) const = default;
};

enum class RollbackTarget { to_last_checkpoint, drop_last_round };

/// Ordered message log. Checkpoints mark irreversible boundaries: a checkpoint
/// at position k freezes messages [0, k) for good.
class CommunicationChannel {
public:
    /// Appends; an irreversible message places a checkpoint right after itself.
    void append(Message message, bool irreversible = false);

    /// Drops every message after the last checkpoint (all messages when there
    /// is none).
    void rollback_to_last_checkpoint();
    /// Drops the last k messages; throws rollback_past_checkpoint when that
    /// would reach at or before the last checkpoint.
    void drop_last_round(std::size_t k);
    void rollback(RollbackTarget target, std::size_t k = 0);

    const std::vector<Message>& messages() const { return messages_; }
    const std::vector<std::size_t>& checkpoints() const { return checkpoints_; }
    std::size_t size() const { return messages_.size(); }
    bool empty() const { return messages_.empty(); }
    std::size_t last_checkpoint() const { return checkpoints_.empty() ? 0 : checkpoints_.back(); }
    std::size_t reversible_count() const { return messages_.size() - last_checkpoint(); }

    /// One rendered message per line.
    std::string render() const;

    bool operator==(const CommunicationChannel&) const = default;

private:
    std::vector<Message> messages_;
    std::vector<std::size_t> checkpoints_;
};

void to_json(nlohmann::json& j, const MessagePayload& payload);
void from_json(const nlohmann::json& j, MessagePayload& payload);
void to_json(nlohmann::json& j, const Message& message);
void from_json(const nlohmann::json& j, Message& message);

} // namespace agentwatch
