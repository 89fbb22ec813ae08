#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "madroid/model.hpp"

namespace madroid::explore {

struct Screen {
    int width = 0;
    int height = 0;
};

struct ScoreConfig {
    std::vector<std::string> ad_classes = {"WebView", "ImageView", "ViewFlipper"};
    double class_weight = 1.0;
    double banner_bonus = 0.5;
    double fullscreen_bonus = 0.25;
    // Banner heuristic: wide, short, anchored near the top or bottom edge.
    double banner_min_width_frac = 0.80;
    double banner_max_height_frac = 0.15;
    double banner_edge_frac = 0.10;
    double fullscreen_area_frac = 0.90;
};

// Ad-candidacy score of a leaf view: class weight plus geometry bonus.
// Throws ContractViolation for non-leaf nodes.
double score_view(const model::ViewNode& node, const Screen& screen,
                  const ScoreConfig& config = {});

struct UiState {
    std::string id;
    model::ViewTree tree;
};

struct Transition {
    std::string from_state;
    std::string node_id;
    std::string to_state;
};

// Recorded UI states and the click transitions between them. The entry state
// is the first state listed.
struct UiStateGraph {
    std::string app_id;
    Screen screen;
    std::vector<UiState> states;
    std::vector<Transition> transitions;

    const UiState* find_state(std::string_view id) const;
    void validate() const;  // throws StructureError on dangling references
};

struct PlanStep {
    std::string state_id;
    std::string node_id;
    double score = 0.0;
};

struct ExplorationPlan {
    std::vector<PlanStep> steps;
    std::string to_json_text() const;
};

struct PlanOptions {
    int depth_cap = 5;        // BFS depth limit from the entry state
    int per_state_cap = 30;   // click budget per state
    ScoreConfig score;
};

// Breadth-first plan over the state graph with main/exit states dequeued
// first at equal depth; within a state, clickable leaves ordered by
// descending score, ties in document order.
ExplorationPlan plan_exploration(const UiStateGraph& graph, const Screen& screen,
                                 const PlanOptions& options = {});

UiStateGraph parse_state_graph_text(std::string_view text);
UiStateGraph parse_state_graph_file(const std::filesystem::path& path);

// Wraps standalone view trees as a linear graph (dump order) so a plan can
// be produced without transition data.
UiStateGraph graph_from_trees(std::vector<model::ViewTree> trees, Screen screen);

}  // namespace madroid::explore
