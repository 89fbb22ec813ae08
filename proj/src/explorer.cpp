#include "madroid/explorer.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "madroid/errors.hpp"

namespace madroid::explore {

using model::ViewNode;
using model::ViewTree;
using nlohmann::json;

namespace {

std::string_view terminal_class_segment(std::string_view class_name) {
    size_t dot = class_name.rfind('.');
    return dot == std::string_view::npos ? class_name : class_name.substr(dot + 1);
}

}  // namespace

double score_view(const ViewNode& node, const Screen& screen, const ScoreConfig& config) {
    if (!node.is_leaf())
        throw ContractViolation("score_view requires a leaf node, got " + node.id);

    double score = 0.0;
    std::string_view terminal = terminal_class_segment(node.class_name);
    for (const auto& ad_class : config.ad_classes) {
        if (terminal.find(ad_class) != std::string_view::npos) {
            score += config.class_weight;
            break;
        }
    }

    const double w = static_cast<double>(node.bounds[2]);
    const double h = static_cast<double>(node.bounds[3]);
    const double y = static_cast<double>(node.bounds[1]);
    const double sw = screen.width, sh = screen.height;
    if (sw > 0 && sh > 0) {
        bool banner_shape = w >= config.banner_min_width_frac * sw &&
                            h <= config.banner_max_height_frac * sh;
        bool near_edge =
            y <= config.banner_edge_frac * sh || (y + h) >= (1.0 - config.banner_edge_frac) * sh;
        if (banner_shape && near_edge) score += config.banner_bonus;
        if (w * h >= config.fullscreen_area_frac * sw * sh) score += config.fullscreen_bonus;
    }
    return score;
}

const UiState* UiStateGraph::find_state(std::string_view id) const {
    for (const auto& state : states)
        if (state.id == id) return &state;
    return nullptr;
}

void UiStateGraph::validate() const {
    std::set<std::string> ids;
    for (const auto& state : states) {
        if (!ids.insert(state.id).second)
            throw StructureError("duplicate state id: " + state.id);
    }
    for (const auto& t : transitions) {
        const UiState* from = find_state(t.from_state);
        if (!from) throw StructureError("transition from unknown state: " + t.from_state);
        if (!ids.contains(t.to_state))
            throw StructureError("transition to unknown state: " + t.to_state);
        if (!from->tree.find(t.node_id))
            throw StructureError("transition node " + t.node_id + " not in state " +
                                 t.from_state);
    }
}

namespace {

void collect_clickable_leaves(const ViewNode& node, std::vector<const ViewNode*>& out) {
    if (node.is_leaf()) {
        if (node.clickable) out.push_back(&node);
        return;
    }
    for (const auto& child : node.children) collect_clickable_leaves(child, out);
}

}  // namespace

ExplorationPlan plan_exploration(const UiStateGraph& graph, const Screen& screen,
                                 const PlanOptions& options) {
    if (graph.states.empty()) throw InputError("exploration graph has no entry state");
    if (screen.width <= 0 || screen.height <= 0)
        throw InputError("screen dimensions must be positive");
    graph.validate();

    // outgoing transitions per state, in declaration order
    std::map<std::string, std::vector<const Transition*>> outgoing;
    for (const auto& t : graph.transitions) outgoing[t.from_state].push_back(&t);

    ExplorationPlan plan;
    std::set<std::string> visited{graph.states.front().id};
    std::vector<const UiState*> level{&graph.states.front()};
    int depth = 0;

    while (!level.empty() && depth <= options.depth_cap) {
        // main/exit pages are dequeued before their equal-depth siblings
        std::stable_partition(level.begin(), level.end(), [](const UiState* s) {
            return s->tree.page_role != model::PageRole::Other;
        });

        std::vector<const UiState*> next_level;
        for (const UiState* state : level) {
            std::vector<const ViewNode*> leaves;
            collect_clickable_leaves(state->tree.root, leaves);

            std::vector<std::pair<double, size_t>> ranked;  // (score, document index)
            ranked.reserve(leaves.size());
            for (size_t i = 0; i < leaves.size(); ++i)
                ranked.emplace_back(score_view(*leaves[i], screen, options.score), i);
            std::stable_sort(ranked.begin(), ranked.end(),
                             [](const auto& a, const auto& b) { return a.first > b.first; });

            int emitted = 0;
            for (const auto& [score, index] : ranked) {
                if (emitted >= options.per_state_cap) break;
                plan.steps.push_back({state->id, leaves[index]->id, score});
                ++emitted;
            }

            if (auto it = outgoing.find(state->id); it != outgoing.end()) {
                for (const Transition* t : it->second) {
                    if (visited.insert(t->to_state).second)
                        next_level.push_back(graph.find_state(t->to_state));
                }
            }
        }
        level = std::move(next_level);
        ++depth;
    }
    return plan;
}

std::string ExplorationPlan::to_json_text() const {
    json doc;
    json arr = json::array();
    for (const auto& step : steps) {
        json s;
        s["state_id"] = step.state_id;
        s["node_id"] = step.node_id;
        s["score"] = step.score;
        arr.push_back(s);
    }
    doc["steps"] = arr;
    return doc.dump(2);
}

UiStateGraph parse_state_graph_text(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw InputError(std::string("state graph is not valid JSON: ") + e.what());
    }
    UiStateGraph graph;
    try {
        graph.app_id = doc.value("app_id", std::string());
        if (auto it = doc.find("screen"); it != doc.end()) {
            graph.screen.width = it->at(0).get<int>();
            graph.screen.height = it->at(1).get<int>();
        }
        for (const auto& state : doc.at("states")) {
            UiState s;
            s.id = state.at("id").get<std::string>();
            s.tree = model::parse_view_tree_text(state.at("tree").dump());
            graph.states.push_back(std::move(s));
        }
        for (const auto& t : doc.value("transitions", json::array())) {
            graph.transitions.push_back({t.at(0).get<std::string>(), t.at(1).get<std::string>(),
                                         t.at(2).get<std::string>()});
        }
    } catch (const json::exception& e) {
        throw StructureError(std::string("state graph schema violation: ") + e.what());
    }
    graph.validate();
    return graph;
}

UiStateGraph parse_state_graph_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open state graph: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_state_graph_text(buffer.str());
}

UiStateGraph graph_from_trees(std::vector<ViewTree> trees, Screen screen) {
    UiStateGraph graph;
    graph.screen = screen;
    for (size_t i = 0; i < trees.size(); ++i) {
        if (graph.app_id.empty()) graph.app_id = trees[i].app_id;
        UiState state;
        state.id = "state-" + std::to_string(i);
        state.tree = std::move(trees[i]);
        graph.states.push_back(std::move(state));
    }
    // star topology from the first dump keeps every tree reachable at depth 1
    for (size_t i = 1; i < graph.states.size(); ++i) {
        graph.transitions.push_back(
            {graph.states.front().id, graph.states.front().tree.root.id, graph.states[i].id});
    }
    return graph;
}

}  // namespace madroid::explore
