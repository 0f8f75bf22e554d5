//! Thirty unit directions (one per antipodal pair, z ≥ 0) minimizing the
//! electrostatic energy of the symmetric 60-point set on the sphere.

pub const DIRECTIONS_30: [[f64; 3]; 30] = [
    [0.786844345848, -0.544880691556, 0.289794767682],
    [-0.366569849787, -0.459897139016, 0.808777575575],
    [0.389951280109, -0.106804835283, 0.914620536781],
    [0.004190192049, -0.805003034448, 0.593255894888],
    [-0.684992085542, 0.714590270759, 0.141938675775],
    [-0.942969194430, 0.318301322245, 0.097433908945],
    [-0.975683843040, -0.189128479477, 0.110776607103],
    [0.054427534265, 0.684174449660, 0.727284652626],
    [0.244505016908, 0.328333773128, 0.912367376735],
    [-0.778581006728, -0.609469473285, 0.149527847228],
    [0.743065809263, -0.219516221838, 0.632191293403],
    [0.406065030792, -0.859487355984, 0.310471698663],
    [0.123315575941, 0.932555680773, 0.339312792254],
    [-0.111510164028, -0.979639474442, 0.166949044424],
    [-0.550711905972, -0.001829703374, 0.834693386104],
    [-0.103551299357, -0.013104394079, 0.994537783725],
    [0.679220140848, 0.246896316408, 0.691160046017],
    [-0.355610723477, 0.773208466773, 0.525061596633],
    [-0.686612839789, 0.458087145017, 0.564552013377],
    [0.836936762120, 0.459785362353, 0.296874176679],
    [0.068657520721, -0.443531276712, 0.893625285803],
    [0.954711296638, -0.020458198795, 0.296829584399],
    [-0.299272168755, 0.400069131185, 0.866245265085],
    [-0.444816321112, -0.779968089207, 0.440213834734],
    [0.454743958977, -0.582990947062, 0.673297473200],
    [-0.869971010913, 0.061170782796, 0.489293956128],
    [0.497014383967, 0.664818118388, 0.557667976124],
    [-0.277765204355, 0.955074237898, 0.103342592150],
    [-0.739954220503, -0.381465210202, 0.554032530602],
    [0.507842266029, 0.855447439342, 0.101518034640],
];
