#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace crossview {

/// The five categorical annotation tasks.
enum class Task { Openness, Floors, Vegetation, Wall, Roof };

inline constexpr std::array<Task, 5> kAllTasks = {
    Task::Openness, Task::Floors, Task::Vegetation, Task::Wall, Task::Roof};

const std::string& task_name(Task t);
std::optional<Task> task_from_name(const std::string& name);

/// Class vocabulary for one task. Class index = position in the vocabulary.
const std::vector<std::string>& task_vocabulary(Task t);
int task_class_count(Task t);

/// Index of the "Unclear" class for a task, or -1 if the task has none
/// (vegetation is Yes/No only).
int unclear_class(Task t);

std::optional<int> class_index(Task t, const std::string& token);

/// One building's labels across all five tasks, stored as class indices.
struct AttributeLabelSet {
    std::string building_id;
    std::array<int, 5> cls{};  // indexed by static_cast<std::size_t>(Task)

    int get(Task t) const { return cls[static_cast<std::size_t>(t)]; }
    void set(Task t, int c) { cls[static_cast<std::size_t>(t)] = c; }
    const std::string& token(Task t) const { return task_vocabulary(t)[get(t)]; }
};

/// Per-task class histogram over a label collection.
std::map<Task, std::vector<int>> class_histogram(const std::vector<AttributeLabelSet>& labels);

}  // namespace crossview
