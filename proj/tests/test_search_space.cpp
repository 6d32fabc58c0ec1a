#include <deque>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "swarmnas/descriptor_json.hpp"
#include "swarmnas/landscape.hpp"
#include "swarmnas/random.hpp"
#include "swarmnas/search_space.hpp"
#include "test_support.hpp"

using namespace swarmnas;
using namespace swarmnas::testing;
using K = LayerKind;

namespace {

std::vector<K> feature_kinds() { return {K::Conv2D, K::Pooling, K::BatchNorm, K::Dropout, K::Flatten}; }

// Every walk of exactly `length` selections as a completed descriptor, duplicates kept.
void all_walks(const SearchSpace& space, std::size_t length, std::vector<ArchitectureDescriptor>& out) {
    std::vector<std::vector<Layer>> variants_by_kind(kAllLayerKinds.size());
    for (const auto& t : space.templates()) {
        std::vector<Layer> variants{Layer{t.kind, {}}};
        for (const auto& spec : t.attributes) {
            std::vector<Layer> next;
            for (const auto& layer : variants) {
                for (const auto& option : spec.options) {
                    Layer copy = layer;
                    copy.attribute_values[spec.name] = option;
                    next.push_back(copy);
                }
            }
            variants = next;
        }
        variants_by_kind[static_cast<std::size_t>(t.kind)] = variants;
    }
    std::vector<Layer> path{input()};
    std::function<void(bool)> rec = [&](bool flat) {
        if (path.size() == length + 1) {
            // Completion written out by hand: Flatten if missing, then Output.
            auto d = arch(path);
            if (!flat) d.layers.push_back(flatten());
            d.layers.push_back(output());
            out.push_back(d);
            return;
        }
        for (K kind : space.selectable_successors(path.back().kind, flat)) {
            for (const auto& layer : variants_by_kind[static_cast<std::size_t>(kind)]) {
                path.push_back(layer);
                rec(flat || kind == K::Flatten);
                path.pop_back();
            }
        }
    };
    rec(false);
}

}  // namespace

TEST(DefaultSpace, InputSuccessorsAreTheFeatureKinds) {
    EXPECT_EQ(default_space().allowed_successors(K::Input), feature_kinds());
}

TEST(DefaultSpace, OutputIsTerminal) { EXPECT_TRUE(default_space().allowed_successors(K::Output).empty()); }

TEST(DefaultSpace, CatalogOptions) {
    const auto& conv_attrs = default_space().node_template(K::Conv2D).attributes;
    ASSERT_EQ(conv_attrs.size(), 2u);
    EXPECT_EQ(conv_attrs[0].name, "filter_count");
    EXPECT_EQ(conv_attrs[0].options,
              (std::vector<AttributeValue>{std::int64_t{16}, std::int64_t{32}, std::int64_t{64}}));
    EXPECT_EQ(conv_attrs[1].options,
              (std::vector<AttributeValue>{std::int64_t{1}, std::int64_t{3}, std::int64_t{5}}));
    const auto& pool_attrs = default_space().node_template(K::Pooling).attributes;
    ASSERT_EQ(pool_attrs.size(), 3u);
    EXPECT_EQ(pool_attrs[0].options, (std::vector<AttributeValue>{std::string("max"), std::string("average")}));
    EXPECT_EQ(default_space().node_template(K::Dropout).attributes.at(0).options,
              (std::vector<AttributeValue>{0.1, 0.3, 0.5}));
    EXPECT_EQ(default_space().node_template(K::Dense).attributes.at(0).options,
              (std::vector<AttributeValue>{std::int64_t{64}, std::int64_t{128}}));
    for (K kind : {K::BatchNorm, K::Flatten, K::Input, K::Output}) {
        EXPECT_TRUE(default_space().node_template(kind).attributes.empty()) << to_string(kind);
    }
}

TEST(DefaultSpace, FlattenStateDecidesDropoutSuccessors) {
    const auto& s = default_space();
    EXPECT_EQ(s.successors(K::Dropout, false), feature_kinds());
    EXPECT_EQ(s.successors(K::Dropout, true), (std::vector<K>{K::Dense, K::Dropout, K::Output}));
    EXPECT_EQ(s.successors(K::Flatten, true), (std::vector<K>{K::Dense, K::Dropout, K::Output}));
    EXPECT_EQ(s.selectable_successors(K::Dense, true), (std::vector<K>{K::Dense, K::Dropout}));
}

TEST(DefaultSpace, OutputReachableWithinThreeTransitions) {
    const auto& s = default_space();
    for (const auto& t : s.templates()) {
        if (t.kind == K::Output) continue;
        for (bool flat : {false, true}) {
            if (!s.placeable(t.kind, flat) && t.kind != K::Input) continue;
            if (t.kind == K::Input && flat) continue;
            // breadth-first search over (kind, flattened)
            std::map<std::pair<K, bool>, int> dist{{{t.kind, flat || t.kind == K::Flatten}, 0}};
            std::deque<std::pair<K, bool>> q{{t.kind, flat || t.kind == K::Flatten}};
            int found = -1;
            while (!q.empty() && found < 0) {
                auto [k, f] = q.front();
                q.pop_front();
                for (K n : s.successors(k, f)) {
                    if (n == K::Output) {
                        found = dist[{k, f}] + 1;
                        break;
                    }
                    std::pair<K, bool> st{n, f || n == K::Flatten};
                    if (!dist.contains(st)) {
                        dist[st] = dist[{k, f}] + 1;
                        q.push_back(st);
                    }
                }
            }
            EXPECT_GE(found, 1) << to_string(t.kind);
            EXPECT_LE(found, 3) << to_string(t.kind) << " flattened=" << flat;
        }
    }
}

TEST(SearchSpace, RejectsMalformedCatalogs) {
    auto base = default_space().templates();
    auto with = [&](auto edit) {
        auto t = base;
        edit(t);
        return t;
    };
    EXPECT_THROW(SearchSpace(with([](auto& t) { t[1].attributes[0].options.push_back(std::int64_t{16}); })),
                 std::invalid_argument);
    EXPECT_THROW(SearchSpace(with([](auto& t) { t[2].attributes[0].options[0] = std::string("max pool"); })),
                 std::invalid_argument);
    EXPECT_THROW(SearchSpace(with([](auto& t) { t[1].attributes[0].options.clear(); })), std::invalid_argument);
    // Flatten and Dense looping among themselves never reach Output.
    EXPECT_THROW(SearchSpace(with([](auto& t) {
                     t[5].allowed_successors = {K::Dense};
                     t[6].allowed_successors = {K::Dense};
                     t[4].allowed_successors = {K::Flatten, K::Conv2D};
                 })),
                 std::invalid_argument);
    EXPECT_THROW(SearchSpace(with([](auto& t) { t.pop_back(); })), std::invalid_argument);
    EXPECT_THROW(SearchSpace(with([](auto& t) { t.push_back(t[1]); })), std::invalid_argument);
    // Options must render to distinct text.
    EXPECT_THROW(SearchSpace(with([](auto& t) { t[4].attributes[0].options = {0.5, 0.5}; })), std::invalid_argument);
}

TEST(Validate, AcceptsLegalConvStack) {
    const auto d = arch({input(), conv(32, 3), flatten(), dense(64), output()});
    EXPECT_TRUE(validate(d, default_space()).valid());
}

TEST(Validate, OutputNotLast) {
    const auto v = validate(arch({input(), output(), conv(32, 3)}), default_space());
    ASSERT_FALSE(v.valid());
    EXPECT_EQ(v.rejection->rule, RuleId::OutputNotLast);
    EXPECT_EQ(v.rejection->position, 1u);
}

TEST(Validate, DenseNeedsFlatten) {
    const auto v = validate(arch({input(), dense(64), output()}), default_space());
    ASSERT_FALSE(v.valid());
    EXPECT_EQ(v.rejection->rule, RuleId::DenseBeforeFlatten);
    EXPECT_EQ(v.rejection->position, 1u);
}

TEST(Validate, NamesFirstViolatedRule) {
    const auto& s = default_space();
    struct Case {
        ArchitectureDescriptor d;
        RuleId rule;
        std::size_t position;
    };
    Layer unknown_attr = conv(32, 3);
    unknown_attr.attribute_values["activation"] = std::string("relu");
    Layer missing_attr = conv(32, 3);
    missing_attr.attribute_values.erase("kernel_size");
    const std::vector<Case> cases = {
        {arch({}), RuleId::Empty, 0},
        {arch({conv(16, 1), flatten(), output()}), RuleId::InputNotFirst, 0},
        {arch({input(), input(), flatten(), output()}), RuleId::DuplicateInput, 1},
        {arch({input(), flatten(), flatten(), output()}), RuleId::DuplicateFlatten, 2},
        {arch({input(), conv(16, 1), flatten()}), RuleId::MissingOutput, 2},
        {arch({input(), conv(48, 3), flatten(), output()}), RuleId::InvalidAttributeValue, 1},
        {arch({input(), unknown_attr, flatten(), output()}), RuleId::UnknownAttribute, 1},
        {arch({input(), missing_attr, flatten(), output()}), RuleId::MissingAttribute, 1},
        {arch({input(), conv(16, 1), output()}), RuleId::IllegalTransition, 2},
        {arch({input(), flatten(), conv(16, 1), output()}), RuleId::IllegalTransition, 2},
        {arch({input(), flatten(), output()}, {0, 28, 1}), RuleId::InvalidInputShape, 0},
        {arch({input(), dropout(0.2), flatten(), output()}), RuleId::InvalidAttributeValue, 1},
    };
    for (const auto& c : cases) {
        const auto v = validate(c.d, s);
        ASSERT_FALSE(v.valid()) << canonical_prefix(c.d, c.d.layers.size());
        EXPECT_EQ(v.rejection->rule, c.rule) << to_string(v.rejection->rule);
        EXPECT_EQ(v.rejection->position, c.position);
    }
}

TEST(Validate, IntegerAndRealOptionsAreDistinct) {
    Layer l = conv(32, 3);
    l.attribute_values["filter_count"] = 32.0;
    EXPECT_FALSE(validate(arch({input(), l, flatten(), output()}), default_space()).valid());
}

TEST(Canonical, InputLayerInterpolatesShape) {
    EXPECT_EQ(canonical_prefix(arch({input(), flatten(), output()}), 1), "Input(28,28,1)");
    EXPECT_EQ(canonical_prefix(arch({input()}, {32, 32, 3}), 1), "Input(32,32,3)");
}

TEST(Canonical, SortedAttributesJoinedInOrder) {
    const auto d = arch({input(), pool("average"), dropout(0.3), flatten(), dense(128), output()});
    EXPECT_EQ(canonical_string(d),
              "Input(28,28,1)|Pooling(pool_size=2,pool_type=average,stride=2)|Dropout(rate=0.3)|Flatten|"
              "Dense(output_size=128)|Output");
}

TEST(Canonical, RejectsInvalid) {
    EXPECT_THROW(canonical_string(arch({input(), dense(64), output()})), std::invalid_argument);
    EXPECT_THROW(canonical_string(arch({input()})), std::invalid_argument);
}

TEST(Canonical, EqualDescriptorsEqualStrings) {
    const auto a = arch({input(), conv(64, 5), batch_norm(), flatten(), output()});
    const auto b = a;
    EXPECT_EQ(canonical_string(a), canonical_string(b));
}

TEST(Canonical, InjectiveOverAllWalksUpToDepthThree) {
    // Group every walk (duplicates included) by canonical string and by
    // structural equality; the two partitions must coincide.
    std::vector<ArchitectureDescriptor> walks;
    for (std::size_t n = 1; n <= 3; ++n) all_walks(default_space(), n, walks);
    std::map<std::string, ArchitectureDescriptor> by_text;
    std::set<std::string> by_structure;  // JSON text is an independent encoding
    for (const auto& d : walks) {
        ASSERT_TRUE(validate(d, default_space()).valid());
        const auto text = canonical_string(d);
        const auto [it, inserted] = by_text.emplace(text, d);
        if (!inserted) {
            ASSERT_EQ(it->second, d) << text;
        }
        by_structure.insert(serialize(d));
    }
    EXPECT_EQ(by_text.size(), by_structure.size());
    EXPECT_EQ(by_text.size(), 3721u);
}

TEST(Canonical, OneAttributeApartMeansDifferentStrings) {
    std::vector<ArchitectureDescriptor> walks;
    all_walks(default_space(), 2, walks);
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < walks.size(); ++i) {
        for (std::size_t j = i + 1; j < walks.size(); ++j) {
            const auto& a = walks[i].layers;
            const auto& b = walks[j].layers;
            if (a.size() != b.size()) continue;
            std::size_t diffs = 0;
            for (std::size_t k = 0; k < a.size(); ++k) {
                if (a[k].kind != b[k].kind) {
                    diffs += 2;
                    continue;
                }
                for (const auto& [key, v] : a[k].attribute_values) diffs += b[k].attribute_values.at(key) != v;
            }
            if (diffs == 1) {
                ++pairs;
                EXPECT_NE(canonical_string(walks[i]), canonical_string(walks[j]));
            }
        }
    }
    EXPECT_GT(pairs, 0u);
}

TEST(Enumeration, CountsMatchClosedForm) {
    const auto& s = default_space();
    // attribute combinations per kind
    const std::uint64_t conv = 3 * 3, pool = 2 * 1 * 1, bn = 1, drop = 3, flat = 1, dense = 2;
    const std::uint64_t feature = conv + pool + bn + drop + flat;  // choices before Flatten
    const std::uint64_t head = dense + drop;                      // choices after Flatten
    const std::uint64_t unflattened = feature - flat;             // depth-1 walks that did not flatten
    EXPECT_EQ(count_walks(s, 1), feature);
    const std::uint64_t exactly2 = unflattened * feature + flat * head;
    EXPECT_EQ(exactly2, 245u);
    EXPECT_EQ(count_walks(s, 2), feature + exactly2);
    // [X] completes to [X, Flatten], which is also a depth-2 walk.
    EXPECT_EQ(enumerate_descriptors(s, 1).size(), feature);
    EXPECT_EQ(enumerate_descriptors(s, 2).size(), feature + exactly2 - unflattened);
    EXPECT_EQ(enumerate_descriptors(s, 2).size(), 246u);

    std::vector<ArchitectureDescriptor> walks;
    for (std::size_t n = 1; n <= 3; ++n) all_walks(s, n, walks);
    EXPECT_EQ(count_walks(s, 3), walks.size());
    EXPECT_EQ(enumerate_descriptors(s, 3).size(), 3721u);
}

TEST(Enumeration, GuardRejectsLargeSpaces) {
    EXPECT_THROW(enumerate_descriptors(default_space(), 3, {}, 1000), std::length_error);
}

TEST(DescriptorJson, RoundTripExhaustiveToDepthThree) {
    for (const auto& d : enumerate_descriptors(default_space(), 3, {32, 32, 3})) {
        const auto text = serialize(d);
        ASSERT_EQ(deserialize(text), d) << text;
    }
}

TEST(DescriptorJson, RoundTripRandomDeepDescriptors) {
    RandomSource rng(11);
    for (int i = 0; i < 1000; ++i) {
        const auto d = random_descriptor(default_space(), 8, {64, 48, 3}, rng);
        ASSERT_TRUE(validate(d, default_space()).valid());
        ASSERT_EQ(deserialize(serialize(d)), d);
    }
}

TEST(DescriptorJson, SchemaShape) {
    const auto j = descriptor_to_json(arch({input(), conv(32, 3), flatten(), output()}));
    EXPECT_EQ(j.at("input_shape"), nlohmann::json::parse("[28,28,1]"));
    EXPECT_EQ(j.at("layers").at(1), nlohmann::json::parse(
                                        R"({"kind":"Conv2D","attributes":{"filter_count":32,"kernel_size":3}})"));
    const auto parsed = deserialize(
        R"({"input_shape":[28,28,1],"layers":[{"kind":"Input"},{"kind":"Dropout","attributes":{"rate":0.5}},)"
        R"({"kind":"Flatten"},{"kind":"Output"}]})");
    EXPECT_EQ(parsed, arch({input(), dropout(0.5), flatten(), output()}));
}

TEST(DescriptorJson, RejectsUnknownFieldsAndBadTypes) {
    EXPECT_THROW(deserialize(R"({"input_shape":[28,28,1],"layers":[],"extra":1})"), std::invalid_argument);
    EXPECT_THROW(deserialize(R"({"input_shape":[28,28,1],"layers":[{"kind":"Input","note":1}]})"),
                 std::invalid_argument);
    EXPECT_THROW(deserialize(R"({"input_shape":[28,28],"layers":[]})"), std::invalid_argument);
    EXPECT_THROW(deserialize(R"({"input_shape":[28,28,1],"layers":[{"kind":"Conv3D"}]})"), std::invalid_argument);
    EXPECT_THROW(deserialize(R"({"input_shape":[28,28,1],"layers":[{"kind":"Dropout","attributes":{"rate":[1]}}]})"),
                 std::invalid_argument);
    EXPECT_THROW(deserialize("not json"), std::invalid_argument);
}
