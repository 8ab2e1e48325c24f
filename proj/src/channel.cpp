#include "agentwatch/channel.hpp"

#include <array>
#include <utility>

#include <fmt/format.h>

#include "agentwatch/error.hpp"

namespace agentwatch {

namespace {

constexpr std::array<std::pair<MessageKind, std::string_view>, 9> kKindNames = {{
    {MessageKind::request_specific, "request-specific"},
    {MessageKind::request_broad, "request-broad"},
    {MessageKind::respond, "respond"},
    {MessageKind::respond_broad, "respond-broad"},
    {MessageKind::share, "share"},
    {MessageKind::accuse, "accuse"},
    {MessageKind::skip, "skip"},
    {MessageKind::discussion, "discussion"},
    {MessageKind::system, "system"},
}};

} // namespace

std::string_view to_string(MessageKind kind) {
    for (const auto& [k, name] : kKindNames)
        if (k == kind) return name;
    return "system";
}

MessageKind message_kind_from_string(std::string_view text) {
    for (const auto& [k, name] : kKindNames)
        if (name == text) return k;
    throw Error(ErrorCode::parse_error, fmt::format("unknown message kind '{}'", text));
}

void CommunicationChannel::append(Message message, bool irreversible) {
    messages_.push_back(std::move(message));
    if (irreversible) checkpoints_.push_back(messages_.size());
}

void CommunicationChannel::rollback_to_last_checkpoint() {
    messages_.resize(last_checkpoint());
}

void CommunicationChannel::drop_last_round(std::size_t k) {
    if (k > reversible_count())
        throw Error(ErrorCode::rollback_past_checkpoint,
                    fmt::format("cannot drop {} messages, only {} follow the last checkpoint", k,
                                reversible_count()));
    messages_.resize(messages_.size() - k);
}

void CommunicationChannel::rollback(RollbackTarget target, std::size_t k) {
    if (target == RollbackTarget::to_last_checkpoint)
        rollback_to_last_checkpoint();
    else
        drop_last_round(k);
}

std::string CommunicationChannel::render() const {
    std::string out;
    for (const auto& message : messages_) {
        out += message.text;
        out += '\n';
    }
    return out;
}

void to_json(nlohmann::json& j, const MessagePayload& p) {
    j = nlohmann::json::object();
    if (p.target) j["target"] = *p.target;
    if (p.property) j["property"] = *p.property;
    if (p.value) j["value"] = *p.value;
    if (p.answer) j["answer"] = *p.answer;
    if (!p.ids.empty()) j["ids"] = p.ids;
    if (p.amount) j["amount"] = *p.amount;
}

void from_json(const nlohmann::json& j, MessagePayload& p) {
    p = {};
    if (j.contains("target")) p.target = j["target"].get<int>();
    if (j.contains("property")) p.property = j["property"].get<std::string>();
    if (j.contains("value")) p.value = j["value"].get<std::string>();
    if (j.contains("answer")) p.answer = j["answer"].get<bool>();
    if (j.contains("ids")) p.ids = j["ids"].get<std::vector<int>>();
    if (j.contains("amount")) p.amount = j["amount"].get<double>();
}

void to_json(nlohmann::json& j, const Message& m) {
    j = {{"author", m.author}, {"kind", to_string(m.kind)}, {"text", m.text}, {"payload", m.payload}};
}

void from_json(const nlohmann::json& j, Message& m) {
    m.author = j.at("author").get<int>();
    m.kind = message_kind_from_string(j.at("kind").get<std::string>());
    m.text = j.at("text").get<std::string>();
    m.payload = j.at("payload").get<MessagePayload>();
}

} // namespace agentwatch
