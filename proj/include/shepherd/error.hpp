#pragma once

#include <stdexcept>
#include <string>

namespace shepherd {

/// Base for every error the library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define SHEPHERD_DEFINE_ERROR(Name)        \
    class Name : public Error {            \
    public:                                \
        using Error::Error;                \
    }

SHEPHERD_DEFINE_ERROR(SyntaxError);
SHEPHERD_DEFINE_ERROR(TemplateError);
SHEPHERD_DEFINE_ERROR(ParseError);
SHEPHERD_DEFINE_ERROR(JudgeError);
SHEPHERD_DEFINE_ERROR(NoLabelMass);
SHEPHERD_DEFINE_ERROR(ArityError);
SHEPHERD_DEFINE_ERROR(NoScore);
SHEPHERD_DEFINE_ERROR(FixtureMiss);
SHEPHERD_DEFINE_ERROR(NoCandidates);
SHEPHERD_DEFINE_ERROR(MissingReward);
SHEPHERD_DEFINE_ERROR(EmptyEpisode);
SHEPHERD_DEFINE_ERROR(EmptyResults);
SHEPHERD_DEFINE_ERROR(ConfigError);

#undef SHEPHERD_DEFINE_ERROR

}  // namespace shepherd
