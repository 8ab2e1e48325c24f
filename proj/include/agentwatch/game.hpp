#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace agentwatch {

enum class Variant { asymmetric, symmetric };

std::string_view to_string(Variant variant);
Variant variant_from_string(std::string_view text);

struct Attribute {
    std::string name;
    std::vector<std::string> values;

    bool operator==(const Attribute&) const = default;
};

/// Ordered attribute table describing what a suspect can look like.
class AttributeSchema {
public:
    AttributeSchema() = default;
    /// Throws invalid_argument on duplicate names or attributes with fewer than
    /// two distinct values.
    explicit AttributeSchema(std::vector<Attribute> attributes);

    /// The 12 attributes shared by both variants.
    static AttributeSchema asymmetric();
    /// All 20 attributes.
    static AttributeSchema symmetric();
    static AttributeSchema for_variant(Variant variant);

    const std::vector<Attribute>& attributes() const { return attributes_; }
    std::size_t size() const { return attributes_.size(); }
    const Attribute& at(std::size_t index) const { return attributes_.at(index); }

    std::optional<std::size_t> index_of(std::string_view name) const;
    /// Throws unknown_property.
    std::size_t require_index(std::string_view name) const;
    /// Throws unknown_property / unknown_value.
    std::size_t value_index(std::string_view name, std::string_view value) const;

    /// Number of distinct full assignments (as a double, it can get large).
    double combination_space() const;

    bool operator==(const AttributeSchema&) const = default;

private:
    std::vector<Attribute> attributes_;
};

/// A suspect: one value index per schema attribute, in schema order.
struct SuspectProfile {
    int id = 0;
    std::vector<std::uint8_t> values;

    const std::string& value(const AttributeSchema& schema, std::size_t attribute) const {
        return schema.at(attribute).values.at(values.at(attribute));
    }

    bool operator==(const SuspectProfile&) const = default;
};

struct GameSpec {
    AttributeSchema schema;
    std::vector<SuspectProfile> suspects;
    int culprit_id = 1;
    int turn_limit = 1;
    Variant variant = Variant::asymmetric;
    std::uint64_t seed = 0;

    int n_suspects() const { return static_cast<int>(suspects.size()); }
    const SuspectProfile& suspect(int id) const;
    const SuspectProfile& culprit() const { return suspect(culprit_id); }

    /// Checks every GameSpec invariant; throws invalid_argument on violation.
    void validate() const;

    bool operator==(const GameSpec&) const = default;
};

using GameSpecPtr = std::shared_ptr<const GameSpec>;

/// Samples suspects uniformly (rejecting duplicates of full profiles) and a
/// culprit uniformly. Pure function of its inputs.
GameSpec generate_game(Variant variant, int n_suspects, int turn_limit, std::uint64_t seed);
GameSpec generate_game(const AttributeSchema& schema, Variant variant, int n_suspects,
                       int turn_limit, std::uint64_t seed);

/// Human-readable "hat is brown, mood is sad, ..." rendering.
std::string describe_profile(const AttributeSchema& schema, const SuspectProfile& profile);

void to_json(nlohmann::json& j, const AttributeSchema& schema);
void from_json(const nlohmann::json& j, AttributeSchema& schema);
void to_json(nlohmann::json& j, const GameSpec& spec);
void from_json(const nlohmann::json& j, GameSpec& spec);

} // namespace agentwatch
