#include "crossview/labels.hpp"

#include <algorithm>
#include <stdexcept>

namespace crossview {

namespace {

const std::vector<std::string> kTaskNames = {"openness", "floors", "vegetation", "wall", "roof"};

const std::vector<std::string> kOpennessVocab = {"Closed", "Partial", "Unclear"};
const std::vector<std::string> kFloorsVocab = {"One", "Two", "Three", "FourPlus", "Unclear"};
const std::vector<std::string> kVegetationVocab = {"Yes", "No"};
const std::vector<std::string> kWallVocab = {"Metal", "Concrete", "Brick", "Wood", "Unclear"};
const std::vector<std::string> kRoofVocab = {"Metal", "Concrete", "Clay", "Tarpaulin", "Wood",
                                             "Unclear"};

}  // namespace

const std::string& task_name(Task t) { return kTaskNames[static_cast<std::size_t>(t)]; }

std::optional<Task> task_from_name(const std::string& name) {
    for (std::size_t i = 0; i < kTaskNames.size(); ++i)
        if (kTaskNames[i] == name) return static_cast<Task>(i);
    return std::nullopt;
}

const std::vector<std::string>& task_vocabulary(Task t) {
    switch (t) {
        case Task::Openness: return kOpennessVocab;
        case Task::Floors: return kFloorsVocab;
        case Task::Vegetation: return kVegetationVocab;
        case Task::Wall: return kWallVocab;
        case Task::Roof: return kRoofVocab;
    }
    throw std::logic_error("bad task");
}

int task_class_count(Task t) { return static_cast<int>(task_vocabulary(t).size()); }

int unclear_class(Task t) {
    const auto& vocab = task_vocabulary(t);
    auto it = std::find(vocab.begin(), vocab.end(), "Unclear");
    return it == vocab.end() ? -1 : static_cast<int>(it - vocab.begin());
}

std::optional<int> class_index(Task t, const std::string& token) {
    const auto& vocab = task_vocabulary(t);
    for (std::size_t i = 0; i < vocab.size(); ++i)
        if (vocab[i] == token) return static_cast<int>(i);
    return std::nullopt;
}

std::map<Task, std::vector<int>> class_histogram(const std::vector<AttributeLabelSet>& labels) {
    std::map<Task, std::vector<int>> hist;
    for (Task t : kAllTasks) hist[t].assign(task_class_count(t), 0);
    for (const auto& l : labels)
        for (Task t : kAllTasks) hist[t][l.get(t)]++;
    return hist;
}

}  // namespace crossview
