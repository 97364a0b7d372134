// 256-entry RGB lookup tables sampled from the matplotlib colormaps.

pub(crate) static MAGMA: [[u8; 3]; 256] = [
    [0, 0, 4],
    [1, 0, 5],
    [1, 1, 6],
    [1, 1, 8],
    [2, 1, 9],
    [2, 2, 11],
    [2, 2, 13],
    [3, 3, 15],
    [3, 3, 18],
    [4, 4, 20],
    [5, 4, 22],
    [6, 5, 24],
    [6, 5, 26],
    [7, 6, 28],
    [8, 7, 30],
    [9, 7, 32],
    [10, 8, 34],
    [11, 9, 36],
    [12, 9, 38],
    [13, 10, 41],
    [14, 11, 43],
    [16, 11, 45],
    [17, 12, 47],
    [18, 13, 49],
    [19, 13, 52],
    [20, 14, 54],
    [21, 14, 56],
    [22, 15, 59],
    [24, 15, 61],
    [25, 16, 63],
    [26, 16, 66],
    [28, 16, 68],
    [29, 17, 71],
    [30, 17, 73],
    [32, 17, 75],
    [33, 17, 78],
    [34, 17, 80],
    [36, 18, 83],
    [37, 18, 85],
    [39, 18, 88],
    [41, 17, 90],
    [42, 17, 92],
    [44, 17, 95],
    [45, 17, 97],
    [47, 17, 99],
    [49, 17, 101],
    [51, 16, 103],
    [52, 16, 105],
    [54, 16, 107],
    [56, 16, 108],
    [57, 15, 110],
    [59, 15, 112],
    [61, 15, 113],
    [63, 15, 114],
    [64, 15, 116],
    [66, 15, 117],
    [68, 15, 118],
    [69, 16, 119],
    [71, 16, 120],
    [73, 16, 120],
    [74, 16, 121],
    [76, 17, 122],
    [78, 17, 123],
    [79, 18, 123],
    [81, 18, 124],
    [82, 19, 124],
    [84, 19, 125],
    [86, 20, 125],
    [87, 21, 126],
    [89, 21, 126],
    [90, 22, 126],
    [92, 22, 127],
    [93, 23, 127],
    [95, 24, 127],
    [96, 24, 128],
    [98, 25, 128],
    [100, 26, 128],
    [101, 26, 128],
    [103, 27, 128],
    [104, 28, 129],
    [106, 28, 129],
    [107, 29, 129],
    [109, 29, 129],
    [110, 30, 129],
    [112, 31, 129],
    [114, 31, 129],
    [115, 32, 129],
    [117, 33, 129],
    [118, 33, 129],
    [120, 34, 129],
    [121, 34, 130],
    [123, 35, 130],
    [124, 35, 130],
    [126, 36, 130],
    [128, 37, 130],
    [129, 37, 129],
    [131, 38, 129],
    [132, 38, 129],
    [134, 39, 129],
    [136, 39, 129],
    [137, 40, 129],
    [139, 41, 129],
    [140, 41, 129],
    [142, 42, 129],
    [144, 42, 129],
    [145, 43, 129],
    [147, 43, 128],
    [148, 44, 128],
    [150, 44, 128],
    [152, 45, 128],
    [153, 45, 128],
    [155, 46, 127],
    [156, 46, 127],
    [158, 47, 127],
    [160, 47, 127],
    [161, 48, 126],
    [163, 48, 126],
    [165, 49, 126],
    [166, 49, 125],
    [168, 50, 125],
    [170, 51, 125],
    [171, 51, 124],
    [173, 52, 124],
    [174, 52, 123],
    [176, 53, 123],
    [178, 53, 123],
    [179, 54, 122],
    [181, 54, 122],
    [183, 55, 121],
    [184, 55, 121],
    [186, 56, 120],
    [188, 57, 120],
    [189, 57, 119],
    [191, 58, 119],
    [192, 58, 118],
    [194, 59, 117],
    [196, 60, 117],
    [197, 60, 116],
    [199, 61, 115],
    [200, 62, 115],
    [202, 62, 114],
    [204, 63, 113],
    [205, 64, 113],
    [207, 64, 112],
    [208, 65, 111],
    [210, 66, 111],
    [211, 67, 110],
    [213, 68, 109],
    [214, 69, 108],
    [216, 69, 108],
    [217, 70, 107],
    [219, 71, 106],
    [220, 72, 105],
    [222, 73, 104],
    [223, 74, 104],
    [224, 76, 103],
    [226, 77, 102],
    [227, 78, 101],
    [228, 79, 100],
    [229, 80, 100],
    [231, 82, 99],
    [232, 83, 98],
    [233, 84, 98],
    [234, 86, 97],
    [235, 87, 96],
    [236, 88, 96],
    [237, 90, 95],
    [238, 91, 94],
    [239, 93, 94],
    [240, 95, 94],
    [241, 96, 93],
    [242, 98, 93],
    [242, 100, 92],
    [243, 101, 92],
    [244, 103, 92],
    [244, 105, 92],
    [245, 107, 92],
    [246, 108, 92],
    [246, 110, 92],
    [247, 112, 92],
    [247, 114, 92],
    [248, 116, 92],
    [248, 118, 92],
    [249, 120, 93],
    [249, 121, 93],
    [249, 123, 93],
    [250, 125, 94],
    [250, 127, 94],
    [250, 129, 95],
    [251, 131, 95],
    [251, 133, 96],
    [251, 135, 97],
    [252, 137, 97],
    [252, 138, 98],
    [252, 140, 99],
    [252, 142, 100],
    [252, 144, 101],
    [253, 146, 102],
    [253, 148, 103],
    [253, 150, 104],
    [253, 152, 105],
    [253, 154, 106],
    [253, 155, 107],
    [254, 157, 108],
    [254, 159, 109],
    [254, 161, 110],
    [254, 163, 111],
    [254, 165, 113],
    [254, 167, 114],
    [254, 169, 115],
    [254, 170, 116],
    [254, 172, 118],
    [254, 174, 119],
    [254, 176, 120],
    [254, 178, 122],
    [254, 180, 123],
    [254, 182, 124],
    [254, 183, 126],
    [254, 185, 127],
    [254, 187, 129],
    [254, 189, 130],
    [254, 191, 132],
    [254, 193, 133],
    [254, 194, 135],
    [254, 196, 136],
    [254, 198, 138],
    [254, 200, 140],
    [254, 202, 141],
    [254, 204, 143],
    [254, 205, 144],
    [254, 207, 146],
    [254, 209, 148],
    [254, 211, 149],
    [254, 213, 151],
    [254, 215, 153],
    [254, 216, 154],
    [253, 218, 156],
    [253, 220, 158],
    [253, 222, 160],
    [253, 224, 161],
    [253, 226, 163],
    [253, 227, 165],
    [253, 229, 167],
    [253, 231, 169],
    [253, 233, 170],
    [253, 235, 172],
    [252, 236, 174],
    [252, 238, 176],
    [252, 240, 178],
    [252, 242, 180],
    [252, 244, 182],
    [252, 246, 184],
    [252, 247, 185],
    [252, 249, 187],
    [252, 251, 189],
    [252, 253, 191],
];

pub(crate) static CIVIDIS: [[u8; 3]; 256] = [
    [0, 34, 78],
    [0, 35, 79],
    [0, 36, 81],
    [0, 37, 83],
    [0, 37, 84],
    [0, 38, 86],
    [0, 39, 88],
    [0, 40, 89],
    [0, 40, 91],
    [0, 41, 93],
    [0, 42, 95],
    [0, 42, 97],
    [0, 43, 98],
    [0, 44, 100],
    [0, 44, 102],
    [0, 45, 104],
    [0, 46, 106],
    [0, 46, 108],
    [0, 47, 109],
    [0, 48, 111],
    [0, 48, 112],
    [0, 49, 112],
    [0, 49, 113],
    [1, 50, 113],
    [5, 51, 113],
    [8, 51, 112],
    [12, 52, 112],
    [15, 53, 112],
    [18, 53, 112],
    [20, 54, 112],
    [22, 55, 112],
    [24, 55, 111],
    [26, 56, 111],
    [28, 57, 111],
    [30, 58, 111],
    [32, 58, 111],
    [33, 59, 110],
    [35, 60, 110],
    [36, 60, 110],
    [38, 61, 110],
    [39, 62, 110],
    [41, 63, 110],
    [42, 63, 109],
    [43, 64, 109],
    [45, 65, 109],
    [46, 65, 109],
    [47, 66, 109],
    [49, 67, 109],
    [50, 67, 109],
    [51, 68, 109],
    [52, 69, 108],
    [53, 69, 108],
    [54, 70, 108],
    [56, 71, 108],
    [57, 72, 108],
    [58, 72, 108],
    [59, 73, 108],
    [60, 74, 108],
    [61, 74, 108],
    [62, 75, 108],
    [63, 76, 108],
    [64, 76, 108],
    [65, 77, 108],
    [66, 78, 108],
    [67, 78, 108],
    [68, 79, 108],
    [69, 80, 108],
    [70, 81, 108],
    [71, 81, 108],
    [72, 82, 108],
    [73, 83, 108],
    [74, 83, 108],
    [75, 84, 108],
    [76, 85, 108],
    [77, 85, 108],
    [78, 86, 108],
    [79, 87, 108],
    [80, 87, 108],
    [81, 88, 109],
    [82, 89, 109],
    [83, 90, 109],
    [84, 90, 109],
    [85, 91, 109],
    [85, 92, 109],
    [86, 92, 109],
    [87, 93, 109],
    [88, 94, 109],
    [89, 94, 110],
    [90, 95, 110],
    [91, 96, 110],
    [92, 97, 110],
    [93, 97, 110],
    [94, 98, 110],
    [94, 99, 111],
    [95, 99, 111],
    [96, 100, 111],
    [97, 101, 111],
    [98, 101, 111],
    [99, 102, 112],
    [100, 103, 112],
    [101, 104, 112],
    [101, 104, 112],
    [102, 105, 112],
    [103, 106, 113],
    [104, 106, 113],
    [105, 107, 113],
    [106, 108, 113],
    [107, 109, 114],
    [108, 109, 114],
    [108, 110, 114],
    [109, 111, 114],
    [110, 111, 115],
    [111, 112, 115],
    [112, 113, 115],
    [113, 114, 116],
    [114, 114, 116],
    [114, 115, 116],
    [115, 116, 117],
    [116, 116, 117],
    [117, 117, 117],
    [118, 118, 118],
    [119, 119, 118],
    [119, 119, 119],
    [120, 120, 119],
    [121, 121, 119],
    [122, 122, 120],
    [123, 122, 120],
    [124, 123, 120],
    [125, 124, 120],
    [126, 124, 120],
    [126, 125, 120],
    [127, 126, 120],
    [128, 127, 120],
    [129, 127, 120],
    [130, 128, 121],
    [131, 129, 121],
    [132, 130, 121],
    [133, 130, 121],
    [134, 131, 121],
    [135, 132, 120],
    [136, 133, 120],
    [137, 133, 120],
    [138, 134, 120],
    [139, 135, 120],
    [140, 136, 120],
    [141, 136, 120],
    [142, 137, 120],
    [143, 138, 120],
    [144, 139, 120],
    [145, 139, 120],
    [146, 140, 120],
    [146, 141, 120],
    [147, 142, 120],
    [148, 142, 119],
    [149, 143, 119],
    [150, 144, 119],
    [151, 145, 119],
    [152, 146, 119],
    [153, 146, 119],
    [154, 147, 118],
    [155, 148, 118],
    [156, 149, 118],
    [157, 149, 118],
    [158, 150, 118],
    [159, 151, 117],
    [160, 152, 117],
    [161, 153, 117],
    [162, 153, 117],
    [163, 154, 116],
    [164, 155, 116],
    [165, 156, 116],
    [166, 156, 116],
    [167, 157, 115],
    [168, 158, 115],
    [169, 159, 115],
    [170, 160, 115],
    [171, 160, 114],
    [172, 161, 114],
    [173, 162, 114],
    [174, 163, 113],
    [175, 164, 113],
    [176, 165, 113],
    [177, 165, 112],
    [179, 166, 112],
    [180, 167, 111],
    [181, 168, 111],
    [182, 169, 111],
    [183, 169, 110],
    [184, 170, 110],
    [185, 171, 109],
    [186, 172, 109],
    [187, 173, 109],
    [188, 174, 108],
    [189, 174, 108],
    [190, 175, 107],
    [191, 176, 107],
    [192, 177, 106],
    [193, 178, 106],
    [194, 179, 105],
    [195, 179, 105],
    [196, 180, 104],
    [197, 181, 104],
    [198, 182, 103],
    [199, 183, 103],
    [200, 184, 102],
    [201, 185, 101],
    [203, 185, 101],
    [204, 186, 100],
    [205, 187, 99],
    [206, 188, 99],
    [207, 189, 98],
    [208, 190, 98],
    [209, 191, 97],
    [210, 192, 96],
    [211, 192, 95],
    [212, 193, 95],
    [213, 194, 94],
    [214, 195, 93],
    [215, 196, 92],
    [217, 197, 92],
    [218, 198, 91],
    [219, 199, 90],
    [220, 200, 89],
    [221, 200, 88],
    [222, 201, 88],
    [223, 202, 87],
    [224, 203, 86],
    [225, 204, 85],
    [226, 205, 84],
    [228, 206, 83],
    [229, 207, 82],
    [230, 208, 81],
    [231, 209, 80],
    [232, 210, 79],
    [233, 211, 78],
    [234, 211, 76],
    [235, 212, 75],
    [237, 213, 74],
    [238, 214, 73],
    [239, 215, 72],
    [240, 216, 70],
    [241, 217, 69],
    [242, 218, 68],
    [243, 219, 66],
    [245, 220, 65],
    [246, 221, 63],
    [247, 222, 62],
    [248, 223, 60],
    [249, 224, 58],
    [251, 225, 56],
    [252, 226, 54],
    [253, 227, 52],
    [254, 228, 52],
    [254, 229, 53],
    [254, 230, 54],
    [254, 232, 56],
];
