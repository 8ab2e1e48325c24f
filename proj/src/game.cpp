#include "agentwatch/game.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "agentwatch/error.hpp"
#include "agentwatch/rng.hpp"

namespace agentwatch {

std::string_view to_string(Variant variant) {
    return variant == Variant::asymmetric ? "asymmetric" : "symmetric";
}

Variant variant_from_string(std::string_view text) {
    if (text == "asymmetric") return Variant::asymmetric;
    if (text == "symmetric") return Variant::symmetric;
    throw Error(ErrorCode::invalid_argument, fmt::format("unknown variant '{}'", text));
}

AttributeSchema::AttributeSchema(std::vector<Attribute> attributes)
    : attributes_(std::move(attributes)) {
    std::set<std::string> names;
    for (const auto& attribute : attributes_) {
        if (!names.insert(attribute.name).second)
            throw Error(ErrorCode::invalid_argument,
                        fmt::format("duplicate attribute '{}'", attribute.name));
        const std::set<std::string> distinct(attribute.values.begin(), attribute.values.end());
        if (distinct.size() < 2 || distinct.size() != attribute.values.size())
            throw Error(ErrorCode::invalid_argument,
                        fmt::format("attribute '{}' needs at least two distinct values",
                                    attribute.name));
        if (attribute.values.size() > 255)
            throw Error(ErrorCode::invalid_argument, "too many values for one attribute");
    }
}

namespace {

const std::vector<Attribute>& full_table() {
    // first 12 rows are the asymmetric set
    static const std::vector<Attribute> table = {
        {"hat", {"brown", "black"}},
        {"mood", {"happy", "sad"}},
        {"shirt_color", {"pink", "green"}},
        {"hobby", {"basketball", "dancing"}},
        {"pants", {"long", "short"}},
        {"pants_color", {"brown", "black"}},
        {"eye_color", {"blue", "brown", "green"}},
        {"eye_glasses", {"circular", "square"}},
        {"shirt", {"button-up", "tee"}},
        {"shoe_color", {"red", "white"}},
        {"hair", {"long", "short"}},
        {"watch", {"bronze", "silver"}},
        {"socks", {"dotted", "white"}},
        {"jacket", {"yellow", "jean"}},
        {"height", {"short", "tall"}},
        {"age", {"young", "old"}},
        {"build", {"medium", "muscular"}},
        {"personality", {"introverted", "extroverted"}},
        {"interests", {"sports", "arts"}},
        {"occupation", {"professional", "student"}},
    };
    return table;
}

} // namespace

AttributeSchema AttributeSchema::asymmetric() {
    const auto& table = full_table();
    return AttributeSchema(std::vector<Attribute>(table.begin(), table.begin() + 12));
}

AttributeSchema AttributeSchema::symmetric() { return AttributeSchema(full_table()); }

AttributeSchema AttributeSchema::for_variant(Variant variant) {
    return variant == Variant::asymmetric ? asymmetric() : symmetric();
}

std::optional<std::size_t> AttributeSchema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < attributes_.size(); ++i)
        if (attributes_[i].name == name) return i;
    return std::nullopt;
}

std::size_t AttributeSchema::require_index(std::string_view name) const {
    if (auto index = index_of(name)) return *index;
    throw Error(ErrorCode::unknown_property, fmt::format("no attribute named '{}'", name));
}

std::size_t AttributeSchema::value_index(std::string_view name, std::string_view value) const {
    const auto& values = attributes_[require_index(name)].values;
    const auto it = std::find(values.begin(), values.end(), value);
    if (it == values.end())
        throw Error(ErrorCode::unknown_value,
                    fmt::format("'{}' is not a value of attribute '{}'", value, name));
    return static_cast<std::size_t>(it - values.begin());
}

double AttributeSchema::combination_space() const {
    double space = 1.0;
    for (const auto& attribute : attributes_) space *= static_cast<double>(attribute.values.size());
    return space;
}

const SuspectProfile& GameSpec::suspect(int id) const {
    if (id < 1 || id > n_suspects())
        throw Error(ErrorCode::invalid_argument, fmt::format("no suspect with id {}", id));
    return suspects[static_cast<std::size_t>(id - 1)];
}

void GameSpec::validate() const {
    if (suspects.size() < 2) throw Error(ErrorCode::invalid_argument, "need at least two suspects");
    if (turn_limit < 1) throw Error(ErrorCode::invalid_argument, "turn limit must be positive");
    if (culprit_id < 1 || culprit_id > n_suspects())
        throw Error(ErrorCode::invalid_argument, "culprit id out of range");
    std::set<std::vector<std::uint8_t>> seen;
    for (std::size_t i = 0; i < suspects.size(); ++i) {
        const auto& s = suspects[i];
        if (s.id != static_cast<int>(i) + 1)
            throw Error(ErrorCode::invalid_argument, "suspect ids must be 1..N in order");
        if (s.values.size() != schema.size())
            throw Error(ErrorCode::invalid_argument, "suspect does not cover the schema");
        for (std::size_t a = 0; a < schema.size(); ++a)
            if (s.values[a] >= schema.at(a).values.size())
                throw Error(ErrorCode::invalid_argument, "suspect value outside its attribute");
        if (!seen.insert(s.values).second)
            throw Error(ErrorCode::invalid_argument,
                        fmt::format("suspect {} duplicates another profile", s.id));
    }
}

GameSpec generate_game(Variant variant, int n_suspects, int turn_limit, std::uint64_t seed) {
    return generate_game(AttributeSchema::for_variant(variant), variant, n_suspects, turn_limit,
                         seed);
}

GameSpec generate_game(const AttributeSchema& schema, Variant variant, int n_suspects,
                       int turn_limit, std::uint64_t seed) {
    if (n_suspects < 2) throw Error(ErrorCode::invalid_argument, "need at least two suspects");
    if (turn_limit < 1) throw Error(ErrorCode::invalid_argument, "turn limit must be positive");
    if (static_cast<double>(n_suspects) > schema.combination_space())
        throw Error(ErrorCode::infeasible_request,
                    fmt::format("{} distinct suspects requested but only {} profiles exist",
                                n_suspects, schema.combination_space()));

    Rng rng(mix_seed(seed, "generate_game"));
    GameSpec spec;
    spec.schema = schema;
    spec.variant = variant;
    spec.turn_limit = turn_limit;
    spec.seed = seed;

    std::set<std::vector<std::uint8_t>> seen;
    while (static_cast<int>(spec.suspects.size()) < n_suspects) {
        SuspectProfile profile;
        profile.id = static_cast<int>(spec.suspects.size()) + 1;
        profile.values.reserve(schema.size());
        for (const auto& attribute : schema.attributes())
            profile.values.push_back(static_cast<std::uint8_t>(rng.below(attribute.values.size())));
        if (seen.insert(profile.values).second) spec.suspects.push_back(std::move(profile));
    }
    spec.culprit_id = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_suspects))) + 1;
    return spec;
}

std::string describe_profile(const AttributeSchema& schema, const SuspectProfile& profile) {
    std::string out;
    for (std::size_t a = 0; a < schema.size(); ++a) {
        if (a) out += ", ";
        out += fmt::format("{} is {}", schema.at(a).name, profile.value(schema, a));
    }
    return out;
}

void to_json(nlohmann::json& j, const AttributeSchema& schema) {
    j = nlohmann::json::array();
    for (const auto& attribute : schema.attributes())
        j.push_back({{"name", attribute.name}, {"values", attribute.values}});
}

void from_json(const nlohmann::json& j, AttributeSchema& schema) {
    std::vector<Attribute> attributes;
    for (const auto& item : j)
        attributes.push_back({item.at("name").get<std::string>(),
                              item.at("values").get<std::vector<std::string>>()});
    schema = AttributeSchema(std::move(attributes));
}

void to_json(nlohmann::json& j, const GameSpec& spec) {
    nlohmann::json suspects = nlohmann::json::array();
    for (const auto& s : spec.suspects) {
        nlohmann::json attributes = nlohmann::json::object();
        for (std::size_t a = 0; a < spec.schema.size(); ++a)
            attributes[spec.schema.at(a).name] = s.value(spec.schema, a);
        suspects.push_back({{"id", s.id}, {"attributes", attributes}});
    }
    j = {{"variant", to_string(spec.variant)},
         {"seed", spec.seed},
         {"turn_limit", spec.turn_limit},
         {"culprit_id", spec.culprit_id},
         {"schema", spec.schema},
         {"suspects", suspects}};
}

void from_json(const nlohmann::json& j, GameSpec& spec) {
    spec.variant = variant_from_string(j.at("variant").get<std::string>());
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.turn_limit = j.at("turn_limit").get<int>();
    spec.culprit_id = j.at("culprit_id").get<int>();
    spec.schema = j.at("schema").get<AttributeSchema>();
    spec.suspects.clear();
    for (const auto& item : j.at("suspects")) {
        SuspectProfile s;
        s.id = item.at("id").get<int>();
        const auto& attributes = item.at("attributes");
        for (std::size_t a = 0; a < spec.schema.size(); ++a) {
            const auto& name = spec.schema.at(a).name;
            s.values.push_back(static_cast<std::uint8_t>(
                spec.schema.value_index(name, attributes.at(name).get<std::string>())));
        }
        spec.suspects.push_back(std::move(s));
    }
    spec.validate();
}

} // namespace agentwatch
